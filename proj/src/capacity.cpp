#include "sievehom/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <utility>

#include "pmin.hpp"

namespace sievehom {

// ----------------------------------------------------------------- regions

ScaledHole::ScaledHole(HoleShape shape, double scale, Pt center)
    : shape_(std::move(shape)), scale_(scale), center_(center) {
    require(scale > 0.0, "region: scale must be positive");
}

bool ScaledHole::marked(const Pt& y, double tol) const {
    const int d = shape_.dim();
    Pt u{};
    for (int i = 0; i < d; ++i) u[i] = (y[i] - center_[i]) / scale_;
    return shape_.signed_distance(u) * scale_ <= tol;
}

Box ScaledHole::bounding_box() const {
    Box b;
    b.d = shape_.dim();
    const double r = scale_ * shape_.circumradius();
    for (int i = 0; i < b.d; ++i) {
        b.lo[i] = center_[i] - r;
        b.hi[i] = center_[i] + r;
    }
    return b;
}

SlicePlate::SlicePlate(HoleShape shape, double scale, Pt center, Pt nu, double t)
    : shape_(std::move(shape)), scale_(scale), center_(center), nu_(nu), t_(t) {
    require(scale > 0.0, "slice: scale must be positive");
    const int d = shape_.dim();
    const double n = norm2(nu_, d);
    require(n > 0.0, "slice: direction must be nonzero");
    for (int i = 0; i < d; ++i) nu_[i] /= n;
}

bool SlicePlate::marked(const Pt& y, double tol) const {
    const int d = shape_.dim();
    Pt u{};
    for (int i = 0; i < d; ++i) u[i] = (y[i] - center_[i]) / scale_;
    const double dn = dot(u, nu_, d) - t_;
    if (std::abs(dn) * scale_ > tol) return false;
    Pt foot = u;
    for (int i = 0; i < d; ++i) foot[i] -= dn * nu_[i];
    return shape_.membership(foot);
}

Box SlicePlate::bounding_box() const {
    Box b;
    b.d = shape_.dim();
    const double r = scale_ * shape_.circumradius();
    for (int i = 0; i < b.d; ++i) {
        b.lo[i] = center_[i] - r;
        b.hi[i] = center_[i] + r;
    }
    return b;
}

bool SlicePlate::empty() const {
    const int d = shape_.dim();
    Pt neg{};
    for (int i = 0; i < d; ++i) neg[i] = -nu_[i];
    return t_ > shape_.support(nu_) + 1e-15 || t_ < -shape_.support(neg) - 1e-15;
}

GraphPatch::GraphPatch(const ConvexSurface& s, Box window)
    : s_(&s), window_(window), d_(s.d) {
    require(window.d == s.d - 1, "graph patch: window dimension mismatch");
}

GraphPatch::GraphPatch(const ConvexSurface& s, Box window, HoleShape clip, double clip_scale,
                       Pt clip_center)
    : s_(&s), window_(window), d_(s.d), clip_(std::move(clip)),
      clip_scale_(clip_scale), clip_center_(clip_center) {
    require(window.d == s.d - 1, "graph patch: window dimension mismatch");
    require(clip_scale > 0.0, "graph patch: clip scale must be positive");
    require(clip_->dim() == s.d, "graph patch: clip dimension mismatch");
}

bool GraphPatch::marked(const Pt& y, double tol) const {
    const int dm = d_ - 1;
    Pt yp{};
    for (int i = 0; i < dm; ++i) yp[i] = y[i];
    const double e = s_->g(yp) - y[d_ - 1];
    const Pt gr = s_->grad(yp);
    const double denom = 1.0 + dot(gr, gr, dm);
    if (std::abs(e) / std::sqrt(denom) > tol) return false;
    // first-order foot point of y on the graph
    Pt foot = yp;
    for (int i = 0; i < dm; ++i) foot[i] -= gr[i] * e / denom;
    if (!window_.contains_closed(foot)) return false;
    if (clip_) {
        Pt x{};
        for (int i = 0; i < dm; ++i) x[i] = foot[i];
        x[d_ - 1] = s_->g(foot);
        Pt local{};
        for (int i = 0; i < d_; ++i) local[i] = (x[i] - clip_center_[i]) / clip_scale_;
        if (!clip_->membership(local)) return false;
    }
    return true;
}

Box GraphPatch::bounding_box() const {
    const int dm = d_ - 1;
    Box b;
    b.d = d_;
    for (int i = 0; i < dm; ++i) {
        b.lo[i] = window_.lo[i];
        b.hi[i] = window_.hi[i];
    }
    // z-range: g is convex, so the max over the window sits at a corner;
    // the sampled min is padded by the curvature over one sample step.
    const int m = 9;
    double zmin = std::numeric_limits<double>::infinity();
    double zmax = -zmin;
    double step2 = 0.0;
    std::array<int, kMaxDim> idx{};
    for (;;) {
        Pt q{};
        for (int i = 0; i < dm; ++i) {
            q[i] = window_.lo[i] + (window_.hi[i] - window_.lo[i]) * idx[i] / (m - 1);
        }
        const double z = s_->g(q);
        zmin = std::min(zmin, z);
        zmax = std::max(zmax, z);
        int ax = dm - 1;
        while (ax >= 0 && ++idx[ax] == m) idx[ax--] = 0;
        if (ax < 0) break;
    }
    for (int i = 0; i < dm; ++i) {
        const double st = (window_.hi[i] - window_.lo[i]) / (m - 1);
        step2 += st * st;
    }
    b.lo[d_ - 1] = zmin - 0.5 * s_->C0 * step2 - 1e-12;
    b.hi[d_ - 1] = zmax + 1e-12;
    if (clip_) {
        const double r = clip_scale_ * clip_->circumradius();
        for (int i = 0; i < d_; ++i) {
            b.lo[i] = std::max(b.lo[i], clip_center_[i] - r);
            b.hi[i] = std::min(b.hi[i], clip_center_[i] + r);
        }
    }
    return b;
}

PlanePatch::PlanePatch(int d, Pt point, Pt normal, HoleShape clip, double clip_scale, Pt clip_center)
    : d_(d), point_(point), normal_(normal), clip_(std::move(clip)),
      clip_scale_(clip_scale), clip_center_(clip_center) {
    require(d >= 2 && d <= kMaxDim, "plane patch: d out of range");
    require(clip_scale > 0.0, "plane patch: clip scale must be positive");
    require(clip_.dim() == d, "plane patch: clip dimension mismatch");
    const double n = norm2(normal_, d);
    require(n > 0.0, "plane patch: normal must be nonzero");
    for (int i = 0; i < d; ++i) normal_[i] /= n;
}

bool PlanePatch::marked(const Pt& y, double tol) const {
    Pt rel = sub(y, point_, d_);
    const double dn = dot(rel, normal_, d_);
    if (std::abs(dn) > tol) return false;
    Pt local{};
    for (int i = 0; i < d_; ++i)
        local[i] = (y[i] - dn * normal_[i] - clip_center_[i]) / clip_scale_;
    return clip_.membership(local);
}

Box PlanePatch::bounding_box() const {
    Box b;
    b.d = d_;
    const double r = clip_scale_ * clip_.circumradius();
    for (int i = 0; i < d_; ++i) {
        b.lo[i] = clip_center_[i] - r;
        b.hi[i] = clip_center_[i] + r;
    }
    return b;
}

// ------------------------------------------------------------- energy core

namespace detail {
namespace {

// Sum over cells of (|grad_h w|^2 + mu^2)^{p/2}; when coef is given, also
// stores coef[c] = p (.)^{(p-2)/2} for the gradient gather.  With p < 2 the
// coefficient blows up on flat cells, so callers must keep mu > 0 there.
double cell_pass(const GridSpec& grid, double p, double mu, const std::vector<double>& w,
                 std::vector<double>* coef) {
    const int d = grid.d;
    const auto ns = grid.node_strides();
    const auto mc = grid.cells();
    const double invh = 1.0 / grid.h;
    const double mu2 = mu * mu;
    const double half_p = 0.5 * p;
    const double em = 0.5 * p - 1.0;
    const std::size_t row_len = static_cast<std::size_t>(mc[d - 1]);
    const std::size_t rows = grid.num_cells() / row_len;
    const bool is2 = (p == 2.0);
    double* cf = coef ? coef->data() : nullptr;
    const double* wp = w.data();

    return parallel_sum(rows, [&](std::size_t row) -> double {
        std::size_t rem = row;
        std::size_t nb = 0;
        for (int i = d - 2; i >= 0; --i) {
            const std::size_t idx = rem % static_cast<std::size_t>(mc[i]);
            rem /= static_cast<std::size_t>(mc[i]);
            nb += idx * ns[i];
        }
        const std::size_t cb = row * row_len;
        Accum acc;
        for (std::size_t k = 0; k < row_len; ++k) {
            const std::size_t j = nb + k;
            const double w0 = wp[j];
            double s = mu2;
            for (int i = 0; i < d; ++i) {
                const double gi = (wp[j + ns[i]] - w0) * invh;
                s += gi * gi;
            }
            if (is2) {
                acc.add(s);
                if (cf) cf[cb + k] = 2.0;
            } else if (cf) {
                const double c = std::pow(std::max(s, 1e-300), em);
                cf[cb + k] = p * c;
                acc.add(c * s);  // s^{p/2} = s^{(p-2)/2} * s
            } else {
                acc.add(std::pow(s, half_p));
            }
        }
        return acc.value();
    });
}

std::array<std::size_t, kMaxDim> cell_strides(const GridSpec& grid) {
    std::array<std::size_t, kMaxDim> cs{};
    const auto mc = grid.cells();
    std::size_t a = 1;
    for (int i = grid.d - 1; i >= 0; --i) {
        cs[i] = a;
        a *= static_cast<std::size_t>(mc[i]);
    }
    return cs;
}

// Enumerates interior nodes (all grid-boundary nodes must be Dirichlet) and
// calls fn(node_flat, cell_flat) where cell_flat indexes the cell whose lower
// corner is the node.
template <class Fn>
void for_interior_nodes(const GridSpec& grid, Fn&& fn) {
    const int d = grid.d;
    const auto ns = grid.node_strides();
    const auto cs = cell_strides(grid);
    std::size_t rows = 1;
    for (int i = 0; i < d - 1; ++i) rows *= static_cast<std::size_t>(grid.n[i] - 2);
    const std::size_t row_len = static_cast<std::size_t>(grid.n[d - 1] - 2);
    detail::parallel_ranges(rows, [&](std::size_t rb, std::size_t re, int) {
        for (std::size_t row = rb; row < re; ++row) {
            std::size_t rem = row;
            std::size_t nb = 0, cbase = 0;
            for (int i = d - 2; i >= 0; --i) {
                const std::size_t idx = 1 + rem % static_cast<std::size_t>(grid.n[i] - 2);
                rem /= static_cast<std::size_t>(grid.n[i] - 2);
                nb += idx * ns[i];
                cbase += idx * cs[i];
            }
            for (std::size_t k = 1; k <= row_len; ++k) fn(nb + k, cbase + k);
        }
    });
}

// g_j = scale h^{d-2} [ sum_i coef(j - e_i)(w_j - w_{j-e_i})
//                       + coef(j) sum_i (w_j - w_{j+e_i}) ] - source_j h^d
// at free interior nodes; fixed nodes stay zero.
void gather_gradient(const GridSpec& grid, double scale, const std::vector<double>& coef,
                     const std::vector<double>& w, const std::vector<unsigned char>& fixed,
                     const std::vector<double>* source, std::vector<double>& g) {
    const int d = grid.d;
    const auto ns = grid.node_strides();
    const auto cs = cell_strides(grid);
    const double f = scale * std::pow(grid.h, d - 2);
    const double hd = std::pow(grid.h, d);
    std::fill(g.begin(), g.end(), 0.0);
    const double* wp = w.data();
    const double* cp = coef.data();
    const double* sp = source ? source->data() : nullptr;
    for_interior_nodes(grid, [&](std::size_t j, std::size_t c) {
        if (fixed[j]) return;
        const double w0 = wp[j];
        const double cj = cp[c];
        double acc = 0.0;
        for (int i = 0; i < d; ++i) {
            acc += cp[c - cs[i]] * (w0 - wp[j - ns[i]]);
            acc += cj * (w0 - wp[j + ns[i]]);
        }
        g[j] = f * acc - (sp ? sp[j] * hd : 0.0);
    });
}

// Gauss-Newton diagonal of the energy Hessian (coef treated as constant).
void gather_diagonal(const GridSpec& grid, double scale, const std::vector<double>& coef,
                     const std::vector<unsigned char>& fixed, std::vector<double>& D) {
    const int d = grid.d;
    const auto cs = cell_strides(grid);
    const double f = scale * std::pow(grid.h, d - 2);
    std::fill(D.begin(), D.end(), 1.0);  // fixed nodes keep a harmless 1
    const double* cp = coef.data();
    for_interior_nodes(grid, [&](std::size_t j, std::size_t c) {
        if (fixed[j]) return;
        double acc = static_cast<double>(d) * cp[c];
        for (int i = 0; i < d; ++i) acc += cp[c - cs[i]];
        D[j] = f * acc;
    });
}

// 2 scale h^{d-2} (2d v_j - sum of neighbours) at free nodes; the p = 2
// linear operator used by conjugate gradients.
void apply_quadratic(const GridSpec& grid, double scale, const std::vector<double>& v,
                     const std::vector<unsigned char>& fixed, std::vector<double>& out) {
    const int d = grid.d;
    const auto ns = grid.node_strides();
    const double f = 2.0 * scale * std::pow(grid.h, d - 2);
    std::fill(out.begin(), out.end(), 0.0);
    const double* vp = v.data();
    for_interior_nodes(grid, [&](std::size_t j, std::size_t) {
        if (fixed[j]) return;
        double acc = 2.0 * d * vp[j];
        for (int i = 0; i < d; ++i) acc -= vp[j - ns[i]] + vp[j + ns[i]];
        out[j] = f * acc;
    });
}

double vdot(const std::vector<double>& a, const std::vector<double>& b) {
    return parallel_sum(a.size(), [&](std::size_t i) { return a[i] * b[i]; });
}

void check_boundary_fixed(const GridSpec& grid, const std::vector<unsigned char>& fixed) {
    const int d = grid.d;
    std::array<int, kMaxDim> idx{};
    // walk each face of the grid box
    for (int ax = 0; ax < d; ++ax) {
        for (int side = 0; side < 2; ++side) {
            idx.fill(0);
            for (;;) {
                auto probe = idx;
                probe[ax] = side == 0 ? 0 : grid.n[ax] - 1;
                require(fixed[grid.flat(probe)] != 0,
                        "solver: grid boundary nodes must carry Dirichlet data");
                int a2 = d - 1;
                while (a2 >= 0) {
                    if (a2 == ax) { --a2; continue; }
                    if (++idx[a2] < grid.n[a2]) break;
                    idx[a2--] = 0;
                }
                if (a2 < 0) break;
            }
        }
    }
}

double full_energy(const MinimizeProblem& prob, double mu, const std::vector<double>& w,
                   std::vector<double>* coef) {
    const GridSpec& grid = *prob.grid;
    const double hd = std::pow(grid.h, grid.d);
    double E = prob.scale * hd * cell_pass(grid, prob.p, mu, w, coef);
    if (prob.source) E -= hd * vdot(*prob.source, w);
    if (prob.extra) E += prob.extra->energy(w);
    return E;
}

void project_bounds(const MinimizeProblem& prob, std::vector<double>& w) {
    if (!prob.has_bound) return;
    const auto& hb = *prob.has_bound;
    const auto& lo = *prob.lower;
    parallel_for(w.size(), [&](std::size_t i) {
        if (hb[i] && w[i] < lo[i]) w[i] = lo[i];
    });
}

MinimizeResult cg_solve(const MinimizeProblem& prob, const SolverOptions& opts,
                        std::vector<double>& w) {
    const GridSpec& grid = *prob.grid;
    const std::size_t N = grid.num_nodes();
    std::vector<double> coef(grid.num_cells());
    std::vector<double> r(N), q(N), hq(N);
    // r = -grad(w); the gather needs the (constant) p = 2 coefficients
    cell_pass(grid, 2.0, 0.0, w, &coef);
    gather_gradient(grid, prob.scale, coef, w, *prob.fixed, prob.source, r);
    parallel_for(N, [&](std::size_t i) { r[i] = -r[i]; });

    double rho = vdot(r, r);
    const double rho0 = rho;
    MinimizeResult res;
    if (rho0 == 0.0) {
        res.energy = full_energy(prob, 0.0, w, nullptr);
        return res;
    }
    q = r;
    int it = 0;
    double rel = 1.0;
    for (; it < opts.max_iter; ++it) {
        apply_quadratic(grid, prob.scale, q, *prob.fixed, hq);
        const double qhq = vdot(q, hq);
        if (qhq <= 0.0) break;  // numerically flat; accept current iterate
        const double alpha = rho / qhq;
        parallel_for(N, [&](std::size_t i) { w[i] += alpha * q[i]; });
        parallel_for(N, [&](std::size_t i) { r[i] -= alpha * hq[i]; });
        const double rho_next = vdot(r, r);
        rel = std::sqrt(rho_next / rho0);
        if (rel <= opts.cg_tol) {
            rho = rho_next;
            ++it;
            break;
        }
        const double beta = rho_next / rho;
        rho = rho_next;
        parallel_for(N, [&](std::size_t i) { q[i] = r[i] + beta * q[i]; });
    }
    if (rel > opts.cg_tol && opts.throw_on_stall)
        throw SolverError("conjugate gradient stalled", rel);
    res.iterations = it;
    res.residual = rel;
    res.energy = full_energy(prob, 0.0, w, nullptr);
    return res;
}

MinimizeResult spg_solve(const MinimizeProblem& prob, const SolverOptions& opts,
                         std::vector<double>& w) {
    const GridSpec& grid = *prob.grid;
    const std::size_t N = grid.num_nodes();
    const auto& fixed = *prob.fixed;
    std::vector<double> coef(grid.num_cells());
    std::vector<double> g(N), gnew(N), D(N), trial(N), dir(N);

    project_bounds(prob, w);
    std::vector<double> mus = prob.p == 2.0 ? std::vector<double>{0.0} : opts.mu_schedule;
    if (mus.empty()) mus.push_back(0.0);

    constexpr int kHist = 10;
    constexpr double kSigma = 1e-4;
    MinimizeResult res;
    res.residual = std::numeric_limits<double>::infinity();

    for (double mu : mus) {
        double E = full_energy(prob, mu, w, &coef);
        gather_gradient(grid, prob.scale, coef, w, fixed, prob.source, g);
        if (prob.extra) {
            prob.extra->add_gradient(w, g);
            parallel_for(N, [&](std::size_t i) { if (fixed[i]) g[i] = 0.0; });
        }
        gather_diagonal(grid, prob.scale, coef, fixed, D);
        if (prob.extra) prob.extra->add_diagonal(w, D);
        double dmax = 0.0;
        for (std::size_t i = 0; i < N; ++i) dmax = std::max(dmax, D[i]);
        const double dfloor = std::max(1e-12 * dmax, 1e-300);
        parallel_for(N, [&](std::size_t i) { if (D[i] < dfloor) D[i] = dfloor; });

        std::array<double, kHist> hist;
        hist.fill(E);
        double lambda = 1.0;

        for (int it = 0; it < opts.max_iter; ++it) {
            // stationarity: unit preconditioned step clipped to the bounds
            double pg = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                if (fixed[i]) continue;
                double v = w[i] - g[i] / D[i];
                if (prob.has_bound && (*prob.has_bound)[i] && v < (*prob.lower)[i])
                    v = (*prob.lower)[i];
                pg = std::max(pg, std::abs(v - w[i]));
            }
            res.residual = pg;
            if (pg <= opts.tol) break;

            parallel_for(N, [&](std::size_t i) {
                double v = w[i] - lambda * g[i] / D[i];
                if (prob.has_bound && (*prob.has_bound)[i] && v < (*prob.lower)[i])
                    v = (*prob.lower)[i];
                dir[i] = fixed[i] ? 0.0 : v - w[i];
            });
            const double gd = vdot(g, dir);
            if (gd >= 0.0) {
                lambda = 1.0;
                continue;
            }
            double emax = *std::max_element(hist.begin(), hist.end());
            double beta = 1.0;
            parallel_for(N, [&](std::size_t i) { trial[i] = w[i] + dir[i]; });
            double Et = full_energy(prob, mu, trial, &coef);
            bool coef_fresh = true;
            while (Et > emax + kSigma * beta * gd && beta > 1e-12) {
                beta *= 0.5;
                parallel_for(N, [&](std::size_t i) { trial[i] = w[i] + beta * dir[i]; });
                Et = full_energy(prob, mu, trial, nullptr);
                coef_fresh = false;
            }
            if (!coef_fresh) Et = full_energy(prob, mu, trial, &coef);
            gather_gradient(grid, prob.scale, coef, trial, fixed, prob.source, gnew);
            if (prob.extra) {
                prob.extra->add_gradient(trial, gnew);
                parallel_for(N, [&](std::size_t i) { if (fixed[i]) gnew[i] = 0.0; });
            }
            double sy = 0.0, sDs = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                const double si = trial[i] - w[i];
                sy += si * (gnew[i] - g[i]);
                sDs += si * D[i] * si;
            }
            lambda = sy > 1e-300 ? std::clamp(sDs / sy, 1e-8, 1e8) : std::min(lambda * 4.0, 1e8);
            w.swap(trial);
            g.swap(gnew);
            E = Et;
            hist[static_cast<std::size_t>(it % kHist)] = E;
            ++res.iterations;

            if (it > 0 && it % 100 == 0) {  // refresh the preconditioner
                gather_diagonal(grid, prob.scale, coef, fixed, D);
                if (prob.extra) prob.extra->add_diagonal(w, D);
                dmax = 0.0;
                for (std::size_t i = 0; i < N; ++i) dmax = std::max(dmax, D[i]);
                const double fl = std::max(1e-12 * dmax, 1e-300);
                parallel_for(N, [&](std::size_t i) { if (D[i] < fl) D[i] = fl; });
            }
        }
        if (res.residual > opts.tol && opts.throw_on_stall)
            throw SolverError("projected gradient stalled", res.residual);
    }
    res.energy = full_energy(prob, 0.0, w, nullptr);
    return res;
}

}  // namespace

double cell_energy(const GridSpec& grid, double p, double mu, const std::vector<double>& w) {
    return std::pow(grid.h, grid.d) * cell_pass(grid, p, mu, w, nullptr);
}

MinimizeResult minimize(const MinimizeProblem& prob, const SolverOptions& opts,
                        std::vector<double>& w) {
    require(prob.grid != nullptr && prob.fixed != nullptr, "minimize: missing grid or mask");
    const GridSpec& grid = *prob.grid;
    require(w.size() == grid.num_nodes(), "minimize: field size mismatch");
    require(prob.fixed->size() == w.size(), "minimize: mask size mismatch");
    require(prob.p > 1.0, "minimize: p must exceed 1");
    require((prob.lower == nullptr) == (prob.has_bound == nullptr),
            "minimize: bounds need both values and mask");
    check_boundary_fixed(grid, *prob.fixed);
    if (prob.p == 2.0 && !prob.has_bound && !prob.extra) return cg_solve(prob, opts, w);
    return spg_solve(prob, opts, w);
}

}  // namespace detail

// ------------------------------------------------------------- operations

double p_dirichlet_energy(const Field& w, double p) {
    return detail::cell_energy(w.grid, p, 0.0, w.values);
}

GridSolve solve_on_grid(double p, const Region& region, double R, int cells,
                        OuterBoundary outer, const SolverOptions& opts) {
    const int d = region.dim();
    require(d >= 2 && d <= kMaxDim, "capacity: dimension out of range");
    require(p > 1.0, "capacity: p must exceed 1");
    require(R > 0.0 && cells >= 4, "capacity: bad grid parameters");

    GridSpec grid = GridSpec::centered_box(d, R, cells);
    for (int i = 0; i < d; ++i) {
        require(std::abs(opts.grid_shift[i]) <= grid.h,
                "capacity: grid shift must stay within one cell");
        grid.origin[i] += opts.grid_shift[i];
    }
    const std::size_t N = grid.num_nodes();
    std::vector<unsigned char> fixed(N, 0);
    std::vector<double> w(N, 0.0);

    // outer Dirichlet-0 set
    {
        std::array<int, kMaxDim> idx{};
        const double R2 = R * R * (1.0 - 1e-14);
        std::size_t j = 0;
        for (;;) {
            if (outer == OuterBoundary::Box) {
                if (grid.on_boundary(idx)) fixed[j] = 1;
            } else {
                const Pt y = grid.node(idx);
                if (dot(y, y, d) >= R2 || grid.on_boundary(idx)) fixed[j] = 1;
            }
            int ax = d - 1;
            while (ax >= 0 && ++idx[ax] == grid.n[ax]) idx[ax--] = 0;
            ++j;
            if (ax < 0) break;
        }
    }

    // Dirichlet-1 marking within h/2 of the region, restricted to its box
    std::size_t marked = 0;
    {
        const double tol = grid.h / 2.0;
        const Box bb = region.bounding_box();
        std::array<int, kMaxDim> lo{}, hi{}, idx{};
        for (int i = 0; i < d; ++i) {
            lo[i] = std::max(0, static_cast<int>(std::floor((bb.lo[i] - tol - grid.origin[i]) / grid.h)));
            hi[i] = std::min(grid.n[i] - 1,
                             static_cast<int>(std::ceil((bb.hi[i] + tol - grid.origin[i]) / grid.h)));
            if (lo[i] > hi[i]) { lo[i] = 1; hi[i] = 0; }
            idx[i] = lo[i];
        }
        bool any_range = true;
        for (int i = 0; i < d; ++i) any_range = any_range && lo[i] <= hi[i];
        while (any_range) {
            const Pt y = grid.node(idx);
            if (region.marked(y, tol)) {
                const std::size_t j = grid.flat(idx);
                require(fixed[j] == 0,
                        "capacity: marked set reaches the outer boundary; increase R");
                fixed[j] = 1;
                w[j] = 1.0;
                ++marked;
            }
            int ax = d - 1;
            while (ax >= 0 && ++idx[ax] > hi[ax]) idx[ax] = lo[ax], --ax;
            if (ax < 0) break;
        }
    }

    GridSolve out;
    out.marked_nodes = marked;
    if (marked == 0) {
        out.potential = Field{grid, std::move(w)};
        return out;  // empty set: zero capacity, zero potential
    }

    detail::MinimizeProblem prob;
    prob.grid = &grid;
    prob.p = p;
    prob.scale = 1.0;
    prob.fixed = &fixed;
    auto res = detail::minimize(prob, opts, w);
    out.iterations = res.iterations;
    out.residual = res.residual;
    out.potential = Field{grid, std::move(w)};
    out.value = p_dirichlet_energy(out.potential, p);
    return out;
}

CapacityEstimate capacity_with_refinement(double p, const Region& region, double R,
                                          int base_cells, int levels, OuterBoundary outer,
                                          const SolverOptions& opts) {
    require(levels >= 1 && levels <= 6, "capacity: levels out of range");
    CapacityEstimate est;
    for (int l = 0; l < levels; ++l) {
        GridSolve s = solve_on_grid(p, region, R, base_cells << l, outer, opts);
        est.levels.push_back(s.value);
        if (l == levels - 1) est.finest = std::move(s);
    }
    const auto& v = est.levels;
    if (levels == 1) {
        est.value = v[0];
        est.order = 0.0;
    } else if (levels == 2) {
        est.value = 2.0 * v[1] - v[0];
        est.order = 1.0;
    } else {
        const double d1 = v[levels - 2] - v[levels - 3];
        const double d2 = v[levels - 1] - v[levels - 2];
        double q = 1.0;
        if (d1 * d2 > 0.0 && std::abs(d1) > std::abs(d2))
            q = std::clamp(std::log2(d1 / d2), 0.5, 3.0);
        est.order = q;
        est.value = v[levels - 1] + d2 / (std::pow(2.0, q) - 1.0);
    }
    return est;
}

ScalingCheck scaling_check(double p, const HoleShape& shape, double t, double R,
                           int cells_scaled, int cells_unit, const SolverOptions& opts) {
    require(t > 0.0, "scaling: t must be positive");
    const int d = shape.dim();
    ScaledHole scaled(shape, t, Pt{});
    ScaledHole unit(shape, 1.0, Pt{});
    // outer radius scales with t so both sides discretize the same condenser
    auto a = capacity_with_refinement(p, scaled, t * R, cells_scaled, 2, OuterBoundary::Sphere, opts);
    auto b = capacity_with_refinement(p, unit, R, cells_unit, 2, OuterBoundary::Sphere, opts);
    ScalingCheck out;
    out.value_scaled = a.value;
    out.value_predicted = std::pow(t, static_cast<double>(d) - p) * b.value;
    out.relative_error = std::abs(out.value_scaled - out.value_predicted) /
                         std::max(std::abs(out.value_predicted), 1e-300);
    return out;
}

double slice_capacity(double p, const HoleShape& shape, const Pt& nu, double t,
                      double R, int cells, const SolverOptions& opts) {
    SlicePlate plate(shape, 1.0, Pt{}, nu, t);
    if (plate.empty()) return 0.0;
    return solve_on_grid(p, plate, R, cells, OuterBoundary::Sphere, opts).value;
}

namespace {

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double fa, double fm, double fb, double whole, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * eps)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
}

}  // namespace

MeanCapacityResult mean_capacity(double p, const HoleShape& shape, const Pt& nu,
                                 double R, int cells, double quad_tol,
                                 const SolverOptions& opts) {
    const int d = shape.dim();
    Pt unitnu = nu;
    const double nn = norm2(unitnu, d);
    require(nn > 0.0, "mean capacity: direction must be nonzero");
    for (int i = 0; i < d; ++i) unitnu[i] /= nn;
    Pt neg{};
    for (int i = 0; i < d; ++i) neg[i] = -unitnu[i];
    const double thi = shape.support(unitnu);
    const double tlo = -shape.support(neg);
    require(thi > tlo, "mean capacity: degenerate support");

    std::map<double, double> cache;
    int evals = 0;
    auto f = [&](double t) {
        auto it = cache.find(t);
        if (it != cache.end()) return it->second;
        const double v = slice_capacity(p, shape, unitnu, t, R, cells, opts);
        ++evals;
        cache.emplace(t, v);
        return v;
    };

    // eight base panels keep the endpoint square-root behaviour honest
    const int base = 8;
    double coarse = 0.0;
    std::vector<double> ts(base + 1), fs(base + 1);
    for (int i = 0; i <= base; ++i) {
        ts[i] = tlo + (thi - tlo) * i / base;
        fs[i] = f(ts[i]);
    }
    for (int i = 0; i < base; ++i) {
        const double m = 0.5 * (ts[i] + ts[i + 1]);
        coarse += (ts[i + 1] - ts[i]) / 6.0 * (fs[i] + 4.0 * f(m) + fs[i + 1]);
    }
    const double eps = quad_tol * std::max(std::abs(coarse), 1e-30);

    MeanCapacityResult out;
    double total = 0.0;
    for (int i = 0; i < base; ++i) {
        const double m = 0.5 * (ts[i] + ts[i + 1]);
        const double whole = (ts[i + 1] - ts[i]) / 6.0 * (fs[i] + 4.0 * f(m) + fs[i + 1]);
        total += adaptive_simpson(f, ts[i], ts[i + 1], fs[i], f(m), fs[i + 1], whole,
                                  eps / base, 6);
    }
    out.value = total;
    out.evaluations = evals;
    return out;
}

CellCapacity cell_capacity(const SieveConfig& sieve, const HoleShape& shape,
                           int cells, const SolverOptions& opts) {
    require(shape.dim() == sieve.d, "cell capacity: dimension mismatch");
    CellCapacity out;
    out.cell_halfwidth = sieve.eps / (2.0 * sieve.a);
    out.cramped = out.cell_halfwidth < 2.0;
    ScaledHole region(shape, 1.0, Pt{});
    out.unit = solve_on_grid(sieve.p, region, out.cell_halfwidth, cells,
                             OuterBoundary::Box, opts).value;
    out.physical = std::pow(sieve.a, static_cast<double>(sieve.d) - sieve.p) * out.unit;
    return out;
}

CellCapacity cell_capacity(const ConvexSurface& s, const SieveConfig& sieve,
                           const HoleShape& shape, const CellIndex& k, int cells,
                           int levels, const SolverOptions& opts) {
    require(shape.dim() == s.d, "cell capacity: dimension mismatch");
    require(k.d == s.d, "cell capacity: cell index dimension mismatch");
    const int dm = s.d - 1;
    const double a = sieve.a;
    Pt cprime{};
    for (int i = 0; i < dm; ++i) cprime[i] = sieve.eps * static_cast<double>(k.k[i]);
    const double cd = sieve.eps * static_cast<double>(k.k[dm]);
    const double win = shape.shadow_radius() + 0.5;
    for (int i = 0; i < dm; ++i)
        require(cprime[i] - a * win >= s.domain.lo[i] && cprime[i] + a * win <= s.domain.hi[i],
                "cell capacity: hole window leaves the chart domain");

    // chart in template coordinates u = (y - eps k) / a
    ConvexSurface sa;
    sa.d = s.d;
    sa.c0 = a * s.c0;
    sa.C0 = a * s.C0;
    sa.strictly_convex = s.strictly_convex;
    sa.domain.d = dm;
    for (int i = 0; i < dm; ++i) {
        sa.domain.lo[i] = -win;
        sa.domain.hi[i] = win;
    }
    auto gf = s.g;
    auto grf = s.grad;
    auto hf = s.hess;
    sa.g = [gf, a, cprime, cd, dm](const Pt& u) {
        Pt x = cprime;
        for (int i = 0; i < dm; ++i) x[i] += a * u[i];
        return (gf(x) - cd) / a;
    };
    sa.grad = [grf, a, cprime, dm](const Pt& u) {
        Pt x = cprime;
        for (int i = 0; i < dm; ++i) x[i] += a * u[i];
        return grf(x);
    };
    sa.hess = [hf, a, cprime, dm](const Pt& u, double* out) {
        Pt x = cprime;
        for (int i = 0; i < dm; ++i) x[i] += a * u[i];
        hf(x, out);
        for (int j = 0; j < dm * dm; ++j) out[j] *= a;
    };

    GraphPatch patch(sa, sa.domain, shape, 1.0, Pt{});
    CellCapacity out;
    out.cell_halfwidth = sieve.eps / (2.0 * a);
    out.cramped = out.cell_halfwidth < 2.0;
    out.unit = capacity_with_refinement(sieve.p, patch, out.cell_halfwidth, cells, levels,
                                        OuterBoundary::Sphere, opts)
                   .value;
    out.physical = std::pow(a, static_cast<double>(sieve.d) - sieve.p) * out.unit;
    return out;
}

TangentGap tangent_approx_gap(const ConvexSurface& s, const Pt& x0prime, double a,
                              const HoleShape& shape, double p, double R, int cells,
                              const SolverOptions& opts, int phase_samples) {
    require(a > 0.0, "tangent gap: scale must be positive");
    require(shape.dim() == s.d, "tangent gap: dimension mismatch");
    require(phase_samples >= 1, "tangent gap: need at least one phase sample");
    const int dm = s.d - 1;
    const double g0 = s.g(x0prime);
    const TangentPlane tp = tangent_plane(s, x0prime);

    // the chart rescaled to template coordinates u = (y - x0) / a
    ConvexSurface sa;
    sa.d = s.d;
    sa.c0 = a * s.c0;
    sa.C0 = a * s.C0;
    sa.strictly_convex = s.strictly_convex;
    const double win = shape.circumradius() + 0.5;
    sa.domain.d = dm;
    for (int i = 0; i < dm; ++i) {
        sa.domain.lo[i] = -win;
        sa.domain.hi[i] = win;
    }
    auto gf = s.g;
    auto grf = s.grad;
    auto hf = s.hess;
    sa.g = [gf, a, x0prime, g0, dm](const Pt& u) {
        Pt x = x0prime;
        for (int i = 0; i < dm; ++i) x[i] += a * u[i];
        return (gf(x) - g0) / a;
    };
    sa.grad = [grf, a, x0prime, dm](const Pt& u) {
        Pt x = x0prime;
        for (int i = 0; i < dm; ++i) x[i] += a * u[i];
        return grf(x);
    };
    sa.hess = [hf, a, x0prime, dm](const Pt& u, double* out) {
        Pt x = x0prime;
        for (int i = 0; i < dm; ++i) x[i] += a * u[i];
        hf(x, out);
        for (int k = 0; k < dm * dm; ++k) out[k] *= a;
    };

    GraphPatch surf(sa, sa.domain, shape, 1.0, Pt{});
    PlanePatch flat(s.d, Pt{}, tp.normal, shape, 1.0, Pt{});

    // Kronecker phase ladder: alpha_i = phi^-(i+1) with phi the root of
    // x^(d+1) = x + 1, shifts low-discrepancy in [0, h)^d.
    double phi = 1.5;
    for (int it = 0; it < 60; ++it) {
        const double f = std::pow(phi, s.d + 1) - phi - 1.0;
        const double df = (s.d + 1) * std::pow(phi, s.d) - 1.0;
        phi -= f / df;
    }
    const double h = 2.0 * R / cells;

    TangentGap out;
    for (int j = 0; j < phase_samples; ++j) {
        SolverOptions po = opts;
        double alpha = 1.0;
        for (int i = 0; i < s.d; ++i) {
            alpha /= phi;
            const double u = (j + 0.5) * alpha;
            po.grid_shift[i] = (u - std::floor(u)) * h;
        }
        const double cs = solve_on_grid(p, surf, R, cells, OuterBoundary::Sphere, po).value;
        const double ct = solve_on_grid(p, flat, R, cells, OuterBoundary::Sphere, po).value;
        out.cap_surface += cs / phase_samples;
        out.cap_tangent += ct / phase_samples;
        out.gap += std::abs(cs - ct) / phase_samples;
    }
    return out;
}

TiltGap plane_tilt_gap(double p, const HoleShape& shape, const Pt& nu_a, const Pt& nu_b,
                       double R, int cells, const SolverOptions& opts, int phase_samples) {
    require(phase_samples >= 1, "tilt gap: need at least one phase sample");
    const int d = shape.dim();
    const SlicePlate plate_a(shape, 1.0, Pt{}, nu_a, 0.0);
    const SlicePlate plate_b(shape, 1.0, Pt{}, nu_b, 0.0);

    // Same Kronecker origin ladder as tangent_approx_gap, with both
    // directions solved per phase.  The gap is the absolute value of the
    // signed mean difference: marking jitter is direction-independent in
    // expectation and cancels, so symmetric templates report a gap near
    // zero instead of the jitter floor.
    double phi = 1.5;
    for (int it = 0; it < 60; ++it) {
        const double f = std::pow(phi, d + 1) - phi - 1.0;
        const double df = (d + 1) * std::pow(phi, d) - 1.0;
        phi -= f / df;
    }
    const double h = 2.0 * R / cells;

    TiltGap out;
    double diff = 0.0;
    for (int j = 0; j < phase_samples; ++j) {
        SolverOptions po = opts;
        double alpha = 1.0;
        for (int i = 0; i < d; ++i) {
            alpha /= phi;
            const double u = (j + 0.5) * alpha;
            po.grid_shift[i] = (u - std::floor(u)) * h;
        }
        const double ca =
            plate_a.empty() ? 0.0
                            : solve_on_grid(p, plate_a, R, cells, OuterBoundary::Sphere, po).value;
        const double cb =
            plate_b.empty() ? 0.0
                            : solve_on_grid(p, plate_b, R, cells, OuterBoundary::Sphere, po).value;
        out.cap_a += ca / phase_samples;
        out.cap_b += cb / phase_samples;
        diff += (ca - cb) / phase_samples;
    }
    out.gap = std::abs(diff);
    return out;
}

FarFieldCheck farfield_bound_check(int d, double p, double ball_radius, double R,
                                   int cells, const SolverOptions& opts) {
    require(d >= 2 && d <= kMaxDim, "far field: dimension out of range");
    require(p > 1.0 && p < static_cast<double>(d), "far field: need 1 < p < d");
    require(ball_radius > 0.0 && 3.0 * ball_radius < R,
            "far field: annulus must fit inside the domain");

    ScaledHole region(HoleShape::ball(d, 1.0), ball_radius, Pt{});
    GridSolve sol = solve_on_grid(p, region, R, cells, OuterBoundary::Sphere, opts);

    const double s_exp = (static_cast<double>(d) - p) / (p - 1.0);
    const GridSpec& grid = sol.potential.grid;
    const double r2lo = 4.0 * ball_radius * ball_radius;
    const double r2hi = 9.0 * ball_radius * ball_radius;

    double dev = 0.0;
    std::array<int, kMaxDim> idx{};
    std::size_t j = 0;
    for (;;) {
        const Pt y = grid.node(idx);
        const double rr = dot(y, y, d);
        if (rr >= r2lo && rr <= r2hi) {
            const double W = std::pow(std::sqrt(rr) / ball_radius, -s_exp);
            dev = std::max(dev, std::abs(sol.potential.values[j] - W));
        }
        int ax = d - 1;
        while (ax >= 0 && ++idx[ax] == grid.n[ax]) idx[ax--] = 0;
        ++j;
        if (ax < 0) break;
    }

    FarFieldCheck out;
    out.max_deviation = dev;
    out.tolerance = 2.0 * grid.h * (s_exp / ball_radius) * std::pow(2.0, -s_exp - 1.0);
    out.within = dev <= out.tolerance;
    return out;
}

}  // namespace sievehom
