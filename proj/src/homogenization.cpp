#include "sievehom/homogenization.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "pmin.hpp"

namespace sievehom {

namespace {

// Per-node samples of a nullable scalar function.
std::vector<double> sample(const GridSpec& grid, const std::function<double(const Pt&)>& f) {
    std::vector<double> out(grid.num_nodes(), 0.0);
    if (!f) return out;
    std::array<int, kMaxDim> idx{};
    std::size_t j = 0;
    for (;;) {
        out[j] = f(grid.node(idx));
        require(std::isfinite(out[j]), "obstacle problem: non-finite sample");
        int ax = grid.d - 1;
        while (ax >= 0 && ++idx[ax] == grid.n[ax]) idx[ax--] = 0;
        ++j;
        if (ax < 0) break;
    }
    return out;
}

std::vector<unsigned char> boundary_mask(const GridSpec& grid) {
    std::vector<unsigned char> fixed(grid.num_nodes(), 0);
    std::array<int, kMaxDim> idx{};
    std::size_t j = 0;
    for (;;) {
        if (grid.on_boundary(idx)) fixed[j] = 1;
        int ax = grid.d - 1;
        while (ax >= 0 && ++idx[ax] == grid.n[ax]) idx[ax--] = 0;
        ++j;
        if (ax < 0) break;
    }
    return fixed;
}

// Nodes within tol of the surface whose chart foot point lands inside a
// sieve hole.  Holes sit strictly inside their cells (a < eps/2), so only
// the nearest lattice point can own the foot.
std::vector<unsigned char> sieve_mark(const GridSpec& grid, const ConvexSurface& s,
                                      const SieveConfig& sieve, const HoleShape& shape,
                                      double tol) {
    const int d = grid.d;
    const int dm = d - 1;
    std::vector<unsigned char> marked(grid.num_nodes(), 0);
    std::array<int, kMaxDim> idx{};
    std::size_t j = 0;
    for (;;) {
        const Pt y = grid.node(idx);
        Pt yp{};
        for (int i = 0; i < dm; ++i) yp[i] = y[i];
        if (s.domain.contains_closed(yp)) {
            const double e = s.g(yp) - y[dm];
            const Pt gr = s.grad(yp);
            const double denom = 1.0 + dot(gr, gr, dm);
            if (std::abs(e) / std::sqrt(denom) <= tol) {
                Pt x = yp;
                for (int i = 0; i < dm; ++i) x[i] -= gr[i] * e / denom;
                x[dm] = s.g(x);
                Pt local{};
                for (int i = 0; i < d; ++i) {
                    const double k = std::round(x[i] / sieve.eps);
                    local[i] = (x[i] - sieve.eps * k) / sieve.a;
                }
                if (shape.membership(local)) marked[j] = 1;
            }
        }
        int ax = d - 1;
        while (ax >= 0 && ++idx[ax] == grid.n[ax]) idx[ax--] = 0;
        ++j;
        if (ax < 0) break;
    }
    return marked;
}

// Facet penalty sum_f coef_f |(phi_f - v(x_f))_+|^p with v interpolated
// multilinearly at the facet centroid.
class PenaltyTerm final : public detail::ExtraTerm {
  public:
    PenaltyTerm(const GridSpec& grid, const LimitMeasureTable& table,
                const std::function<double(const Pt&)>& obstacle, double p)
        : p_(p) {
        const auto strides = grid.node_strides();
        for (const FacetEntry& f : table.facets) {
            if (f.cap * f.weight == 0.0) continue;
            Stencil st;
            st.coef = f.cap * f.weight;
            st.phi = obstacle ? obstacle(f.centroid) : 0.0;
            require(std::isfinite(st.phi), "facet penalty: non-finite obstacle value");
            std::array<std::size_t, kMaxDim> i0{};
            std::array<double, kMaxDim> frac{};
            for (int i = 0; i < grid.d; ++i) {
                const double span = grid.h * (grid.n[i] - 1);
                const double sraw = (f.centroid[i] - grid.origin[i]) / grid.h;
                require(f.centroid[i] >= grid.origin[i] - 1e-9 &&
                            f.centroid[i] <= grid.origin[i] + span + 1e-9,
                        "facet penalty: centroid outside the grid");
                double base = std::floor(std::clamp(sraw, 0.0, grid.n[i] - 1.0));
                if (base > grid.n[i] - 2.0) base = grid.n[i] - 2.0;
                i0[i] = static_cast<std::size_t>(base);
                frac[i] = std::clamp(sraw - base, 0.0, 1.0);
            }
            st.m = 1 << grid.d;
            for (int corner = 0; corner < st.m; ++corner) {
                double wgt = 1.0;
                std::size_t at = 0;
                for (int i = 0; i < grid.d; ++i) {
                    const bool hi = corner & (1 << i);
                    wgt *= hi ? frac[i] : 1.0 - frac[i];
                    at += (i0[i] + (hi ? 1 : 0)) * strides[i];
                }
                st.node[corner] = at;
                st.wgt[corner] = wgt;
            }
            facets_.push_back(st);
        }
    }

    double energy(const std::vector<double>& w) const override {
        double acc = 0.0;
        for (const Stencil& f : facets_) {
            const double pos = shortfall(f, w);
            if (pos > 0.0) acc += f.coef * std::pow(pos, p_);
        }
        return acc;
    }

    void add_gradient(const std::vector<double>& w, std::vector<double>& g) const override {
        for (const Stencil& f : facets_) {
            const double pos = shortfall(f, w);
            if (pos <= 0.0) continue;
            const double slope = f.coef * p_ * std::pow(pos, p_ - 1.0);
            for (int c = 0; c < f.m; ++c) g[f.node[c]] -= slope * f.wgt[c];
        }
    }

    void add_diagonal(const std::vector<double>& w, std::vector<double>& D) const override {
        for (const Stencil& f : facets_) {
            const double pos = shortfall(f, w);
            if (pos <= 0.0) continue;
            // p < 2 makes the exact curvature blow up at the kink; the floor
            // only tempers the preconditioner, not the energy
            const double curv = f.coef * p_ * (p_ - 1.0) * std::pow(std::max(pos, 1e-4), p_ - 2.0);
            for (int c = 0; c < f.m; ++c) D[f.node[c]] += curv * f.wgt[c] * f.wgt[c];
        }
    }

    std::size_t size() const { return facets_.size(); }

  private:
    struct Stencil {
        std::array<std::size_t, 16> node{};
        std::array<double, 16> wgt{};
        int m = 0;
        double coef = 0.0;
        double phi = 0.0;
    };

    double shortfall(const Stencil& f, const std::vector<double>& w) const {
        double v = 0.0;
        for (int c = 0; c < f.m; ++c) v += f.wgt[c] * w[f.node[c]];
        return f.phi - v;
    }

    std::vector<Stencil> facets_;
    double p_;
};

double box_volume(const Box& b) {
    double v = 1.0;
    for (int i = 0; i < b.d; ++i) v *= b.hi[i] - b.lo[i];
    return v;
}

ObstacleSolution finish_solution(const GridSpec& grid, std::vector<double> w,
                                 const std::vector<double>& source,
                                 const detail::ExtraTerm* extra,
                                 const detail::MinimizeResult& res, double p,
                                 std::size_t constrained) {
    ObstacleSolution out;
    const double hd = std::pow(grid.h, grid.d);
    out.energy_gradient = detail::cell_energy(grid, p, 0.0, w);
    for (std::size_t j = 0; j < w.size(); ++j) out.energy_source += source[j] * w[j] * hd;
    out.energy_obstacle = extra ? extra->energy(w) : 0.0;
    out.energy_total = out.energy_gradient + out.energy_source + out.energy_obstacle;
    out.constrained_nodes = constrained;
    out.iterations = res.iterations;
    out.residual = res.residual;
    out.u = Field{grid, std::move(w)};
    return out;
}

ObstacleSolution solve_engine(const GridSpec& grid, const std::vector<unsigned char>& marked,
                              const std::vector<double>& phi, const std::vector<double>& source,
                              double p, const detail::ExtraTerm* extra,
                              const SolverOptions& opts, std::vector<double> w0) {
    const std::size_t N = grid.num_nodes();
    require(marked.empty() || marked.size() == N, "obstacle solve: mask size mismatch");
    require(phi.empty() || phi.size() == N, "obstacle solve: obstacle size mismatch");
    require(source.empty() || source.size() == N, "obstacle solve: source size mismatch");

    const std::vector<unsigned char> fixed = boundary_mask(grid);
    std::vector<double> lower(N, 0.0);
    std::vector<unsigned char> has_bound(N, 0);
    std::size_t constrained = 0;
    for (std::size_t j = 0; j < N; ++j) {
        if (marked.empty() || !marked[j]) continue;
        const double ph = phi.empty() ? 0.0 : phi[j];
        if (fixed[j]) {
            require(ph <= 1e-12, "obstacle solve: positive obstacle on the fixed boundary");
            continue;
        }
        lower[j] = ph;
        has_bound[j] = 1;
        ++constrained;
    }

    std::vector<double> w = w0.empty() ? std::vector<double>(N, 0.0) : std::move(w0);
    require(w.size() == N, "obstacle solve: warm start size mismatch");
    for (std::size_t j = 0; j < N; ++j) {
        if (fixed[j]) w[j] = 0.0;
        else if (has_bound[j]) w[j] = std::max(w[j], lower[j]);
    }

    std::vector<double> negated;
    const std::vector<double>* src = nullptr;
    if (!source.empty()) {
        negated.resize(N);
        for (std::size_t j = 0; j < N; ++j) negated[j] = -source[j];
        src = &negated;
    }

    detail::MinimizeProblem prob;
    prob.grid = &grid;
    prob.p = p;
    prob.fixed = &fixed;
    prob.source = src;
    prob.lower = constrained ? &lower : nullptr;
    prob.has_bound = constrained ? &has_bound : nullptr;
    prob.extra = extra;
    const detail::MinimizeResult res = detail::minimize(prob, opts, w);

    const std::vector<double> plain = source.empty() ? std::vector<double>(N, 0.0) : source;
    return finish_solution(grid, std::move(w), plain, extra, res, p, constrained);
}

}  // namespace

void ObstacleProblemSpec::validate() const {
    require(d >= 2 && d <= kMaxDim, "obstacle problem: d out of range");
    require(p > 1.0 && p < (d + 4.0) / 4.0, "obstacle problem: p must lie in (1, (d+4)/4)");
    require(domain.d == d, "obstacle problem: domain dimension mismatch");
    for (int i = 0; i < d; ++i)
        require(domain.hi[i] > domain.lo[i], "obstacle problem: empty domain");
    require(surface.d == d, "obstacle problem: surface dimension mismatch");
    require(static_cast<bool>(surface.g), "obstacle problem: surface chart not set");
    require(shape.dim() == d, "obstacle problem: hole template dimension mismatch");
    require(hole_prefactor > 0.0 && hole_prefactor <= 1.0,
            "obstacle problem: hole prefactor must lie in (0, 1]");
    require(grid_h >= 0.0, "obstacle problem: negative grid spacing");
    require(max_cells >= 8, "obstacle problem: max_cells too small");
    for (int i = 0; i < d - 1; ++i)
        require(surface.domain.lo[i] <= domain.lo[i] && surface.domain.hi[i] >= domain.hi[i],
                "obstacle problem: chart domain must cover the domain laterally");
}

SieveConfig ObstacleProblemSpec::sieve_at(double eps) const {
    return SieveConfig::with_hole_size(eps, hole_prefactor * critical_hole_size(eps, d, p), d,
                                       p);
}

double LimitMeasureTable::total_weight() const {
    double acc = 0.0;
    for (const FacetEntry& f : facets) acc += f.weight;
    return acc;
}

double LimitMeasureTable::total_measure() const {
    double acc = 0.0;
    for (const FacetEntry& f : facets) acc += f.weight * f.cap;
    return acc;
}

LimitMeasureTable build_limit_measure(const ConvexSurface& s, const HoleShape& shape, double p,
                                      const Box& domain, double delta, double cap_R,
                                      int cap_cells, double quad_tol,
                                      const SolverOptions& opts) {
    require(s.d == domain.d, "limit measure: dimension mismatch");
    require(shape.dim() == s.d, "limit measure: template dimension mismatch");
    require(delta > 0.0, "limit measure: delta must be positive");
    const int dm = s.d - 1;

    // lateral range of the surface inside the domain
    Box range;
    range.d = dm;
    for (int i = 0; i < dm; ++i) {
        range.lo[i] = std::max(s.domain.lo[i], domain.lo[i]);
        range.hi[i] = std::min(s.domain.hi[i], domain.hi[i]);
        require(range.hi[i] > range.lo[i], "limit measure: surface misses the domain");
    }

    // facet size: diameter at most delta so the penalty quadrature samples
    // the surface measure densely, and small enough that the normal varies
    // at most delta per facet (the normal is 1-Lipschitz in grad g, which is
    // C0-Lipschitz in x')
    std::array<int, kMaxDim> cnt{};
    std::array<double, kMaxDim> step{};
    for (int i = 0; i < dm; ++i) {
        const double ext = range.hi[i] - range.lo[i];
        double lim = delta;
        if (s.C0 > 0.0) lim = std::min(lim, delta / (s.C0 * std::sqrt(static_cast<double>(dm))));
        cnt[i] = std::max(1, static_cast<int>(std::ceil(ext / lim - 1e-12)));
        step[i] = ext / cnt[i];
    }

    // mean-capacity cache: one value for a ball, else keyed by the normal
    // quantized at delta/4
    std::map<std::array<long long, kMaxDim>, double> cache;
    double ball_cap = -1.0;
    auto capacity_for = [&](const Pt& nu) {
        if (shape.kind() == HoleShape::Kind::Ball) {
            if (ball_cap < 0.0) {
                Pt ez{};
                ez[dm] = 1.0;
                ball_cap = mean_capacity(p, shape, ez, cap_R, cap_cells, quad_tol, opts).value;
            }
            return ball_cap;
        }
        std::array<long long, kMaxDim> key{};
        for (int i = 0; i < s.d; ++i) key[i] = std::llround(nu[i] / (delta / 4.0));
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        const double value = mean_capacity(p, shape, nu, cap_R, cap_cells, quad_tol, opts).value;
        cache.emplace(key, value);
        return value;
    };

    static constexpr double kSimpson[3] = {1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0};
    LimitMeasureTable table;
    std::array<int, kMaxDim> idx{};
    for (;;) {
        Pt mid{};
        for (int i = 0; i < dm; ++i) mid[i] = range.lo[i] + (idx[i] + 0.5) * step[i];
        const TangentPlane tp = tangent_plane(s, mid);
        // facet area: tensor Simpson of the graph area element
        double weight = 0.0;
        std::array<int, kMaxDim> q{};
        for (;;) {
            Pt x{};
            double wq = 1.0;
            for (int i = 0; i < dm; ++i) {
                x[i] = range.lo[i] + (idx[i] + 0.5 * q[i]) * step[i];
                wq *= kSimpson[q[i]] * step[i];
            }
            const Pt gr = s.grad(x);
            weight += wq * std::sqrt(1.0 + dot(gr, gr, dm));
            int ax = dm - 1;
            while (ax >= 0 && ++q[ax] == 3) q[ax--] = 0;
            if (ax < 0) break;
        }
        if (tp.point[dm] >= domain.lo[dm] && tp.point[dm] <= domain.hi[dm]) {
            FacetEntry f;
            f.centroid = tp.point;
            f.normal = tp.normal;
            f.weight = weight;
            f.cap = capacity_for(tp.normal);
            table.facets.push_back(f);
        }
        int ax = dm - 1;
        while (ax >= 0 && ++idx[ax] == cnt[ax]) idx[ax--] = 0;
        if (ax < 0) break;
    }
    require(!table.facets.empty(), "limit measure: no facets inside the domain");
    return table;
}

ObstacleSolution solve_obstacle_masked(const GridSpec& grid,
                                       const std::vector<unsigned char>& marked,
                                       const std::vector<double>& phi,
                                       const std::vector<double>& source, double p,
                                       const SolverOptions& opts) {
    require(p > 1.0, "obstacle solve: p must exceed 1");
    return solve_engine(grid, marked, phi, source, p, nullptr, opts, {});
}

ObstacleSolution solve_perforated(const ObstacleProblemSpec& spec, double eps,
                                  const SolverOptions& opts) {
    spec.validate();
    const SieveConfig sieve = spec.sieve_at(eps);
    const double h_fine = spec.grid_h > 0.0 ? spec.grid_h : sieve.a / 4.0;
    require(h_fine <= sieve.a / 2.0, "perforated: grid_h too coarse to resolve the holes");
    for (int i = 0; i < spec.d; ++i)
        require((spec.domain.hi[i] - spec.domain.lo[i]) / h_fine <= spec.max_cells + 1e-9,
                "perforated: grid exceeds max_cells; raise grid_h or max_cells");

    // coarse-to-fine continuation: each level marks its own grid and warm
    // starts from the previous solution
    std::vector<double> spacings;
    for (double h = h_fine; h <= sieve.a / 2.0 + 1e-15 && spacings.size() < 3; h *= 2.0)
        spacings.push_back(h);
    std::reverse(spacings.begin(), spacings.end());

    ObstacleSolution sol;
    bool have = false;
    for (double h : spacings) {
        const GridSpec grid = GridSpec::over_box(spec.domain, h);
        const auto marked = sieve_mark(grid, spec.surface, sieve, spec.shape, grid.h / 2.0);
        const auto phi = sample(grid, spec.obstacle);
        const auto src = sample(grid, spec.source);
        std::vector<double> w0;
        if (have) {
            w0.resize(grid.num_nodes());
            std::array<int, kMaxDim> idx{};
            std::size_t j = 0;
            for (;;) {
                w0[j] = interpolate(sol.u, grid.node(idx));
                int ax = grid.d - 1;
                while (ax >= 0 && ++idx[ax] == grid.n[ax]) idx[ax--] = 0;
                ++j;
                if (ax < 0) break;
            }
        }
        sol = solve_engine(grid, marked, phi, src, spec.p, nullptr, opts, std::move(w0));
        have = true;
    }
    return sol;
}

ObstacleSolution solve_homogenized(const ObstacleProblemSpec& spec,
                                   const LimitMeasureTable& table,
                                   const SolverOptions& opts) {
    spec.validate();
    require(spec.grid_h > 0.0, "homogenized: grid_h must be set");
    const GridSpec grid = GridSpec::over_box(spec.domain, spec.grid_h);
    const PenaltyTerm penalty(grid, table, spec.obstacle, spec.p);
    const auto src = sample(grid, spec.source);
    return solve_engine(grid, {}, {}, src, spec.p, &penalty, opts, {});
}

CorrectorEnergy corrector_energy(const ConvexSurface& s, const SieveConfig& sieve,
                                 const HoleShape& shape, const Box& Q, int cells, int levels,
                                 bool quantize_offsets, const SolverOptions& opts) {
    require(Q.d == s.d, "corrector: box dimension mismatch");
    require(shape.dim() == s.d, "corrector: template dimension mismatch");
    const int dm = s.d - 1;
    Box qprime;
    qprime.d = dm;
    for (int i = 0; i < dm; ++i) {
        qprime.lo[i] = Q.lo[i];
        qprime.hi[i] = Q.hi[i];
    }
    if (quantize_offsets)
        require(s.c0 == 0.0, "corrector: offset cache requires a flat chart");

    const auto hits = enumerate_hit_cells(s, sieve, shape, qprime);
    const double quantum = shape.vertical_extent() / 64.0;
    std::map<long long, double> cache;

    CorrectorEnergy out;
    const double phys = std::pow(sieve.a, static_cast<double>(sieve.d) - sieve.p);
    for (const HitCell& hc : hits) {
        const double cd = sieve.eps * static_cast<double>(hc.index.k[dm]);
        if (cd < Q.lo[dm] || cd >= Q.hi[dm]) continue;
        CorrectorCell row;
        row.index = hc.index;
        Pt cprime{};
        for (int i = 0; i < dm; ++i) cprime[i] = sieve.eps * static_cast<double>(hc.index.k[i]);
        row.offset = (s.g(cprime) - cd) / sieve.a;

        if (quantize_offsets) {
            const long long key = std::llround(row.offset / quantum);
            auto it = cache.find(key);
            if (it == cache.end()) {
                const TangentPlane tp = tangent_plane(s, cprime);
                Pt at{};
                at[dm] = key * quantum;
                PlanePatch patch(s.d, at, tp.normal, shape, 1.0, Pt{});
                const double R_cell = sieve.eps / (2.0 * sieve.a);
                const double unit = capacity_with_refinement(sieve.p, patch, R_cell, cells,
                                                             levels, OuterBoundary::Sphere, opts)
                                        .value;
                it = cache.emplace(key, unit).first;
                ++out.distinct_solves;
            }
            row.unit = it->second;
        } else {
            row.unit = cell_capacity(s, sieve, shape, hc.index, cells, levels, opts).unit;
            ++out.distinct_solves;
        }
        row.physical = phys * row.unit;
        out.total += row.physical;
        out.cells.push_back(row);
    }
    out.n_cells = out.cells.size();
    out.per_volume = out.total / box_volume(Q);
    return out;
}

double lp_distance(const Field& a, const Field& b, double p) {
    require(a.grid == b.grid, "lp distance: fields live on different grids");
    require(a.values.size() == b.values.size(), "lp distance: size mismatch");
    double acc = 0.0;
    for (std::size_t j = 0; j < a.values.size(); ++j)
        acc += std::pow(std::abs(a.values[j] - b.values[j]), p);
    return std::pow(acc * std::pow(a.grid.h, a.grid.d), 1.0 / p);
}

ConvergenceReport convergence_experiment(const ObstacleProblemSpec& spec,
                                         const std::vector<double>& eps_list,
                                         const LimitMeasureTable& table,
                                         const SolverOptions& opts) {
    spec.validate();
    require(spec.grid_h > 0.0, "convergence: grid_h must be set for the shared grid");
    require(eps_list.size() >= 3, "convergence: need at least three epsilon values");

    ConvergenceReport report;
    report.limit = solve_homogenized(spec, table, opts);

    Box qprime;
    qprime.d = spec.d - 1;
    for (int i = 0; i < spec.d - 1; ++i) {
        qprime.lo[i] = spec.domain.lo[i];
        qprime.hi[i] = spec.domain.hi[i];
    }

    for (double eps : eps_list) {
        const SieveConfig sieve = spec.sieve_at(eps);
        require(spec.grid_h <= sieve.a / 4.0 + 1e-12,
                "convergence: grid_h must be at most a quarter hole size for every epsilon");
        ConvergenceRow row;
        row.eps = eps;
        row.a_eps = sieve.a;
        const ObstacleSolution sol = solve_perforated(spec, eps, opts);
        row.energy_perforated = sol.energy_total;
        row.energy_hom = report.limit.energy_total;
        row.lp_distance = lp_distance(sol.u, report.limit.u, spec.p);
        std::size_t n = 0;
        for (const HitCell& hc : enumerate_hit_cells(spec.surface, sieve, spec.shape, qprime)) {
            const double cd = sieve.eps * static_cast<double>(hc.index.k[spec.d - 1]);
            if (cd >= spec.domain.lo[spec.d - 1] && cd < spec.domain.hi[spec.d - 1]) ++n;
        }
        row.n_hit_cells = n;
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace sievehom
