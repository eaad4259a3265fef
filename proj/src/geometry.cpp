#include "sievehom/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace sievehom {

double critical_hole_size(double eps, int d, double p) {
    require(eps > 0.0, "critical_hole_size: eps must be positive");
    require(d >= 2, "critical_hole_size: d must be at least 2");
    require(p > 1.0, "critical_hole_size: p must exceed 1");
    require(p < static_cast<double>(d), "critical_hole_size: p must be below d");
    return std::pow(eps, static_cast<double>(d) / (d - p + 1.0));
}

namespace {

// Cyclic Jacobi on a symmetric m x m matrix (m <= 3); returns extreme
// eigenvalues. Plenty for spectral-bound checks on chart Hessians.
void sym_eig_bounds(const double* M, int m, double& lmin, double& lmax) {
    double A[3][3] = {};
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) A[i][j] = M[i * m + j];
    for (int sweep = 0; sweep < 50; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j) off += A[i][j] * A[i][j];
        if (off < 1e-30) break;
        for (int pi = 0; pi < m; ++pi)
            for (int qi = pi + 1; qi < m; ++qi) {
                if (std::abs(A[pi][qi]) < 1e-300) continue;
                double theta = (A[qi][qi] - A[pi][pi]) / (2.0 * A[pi][qi]);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (int k = 0; k < m; ++k) {
                    double aik = A[pi][k], aqk = A[qi][k];
                    A[pi][k] = c * aik - s * aqk;
                    A[qi][k] = s * aik + c * aqk;
                }
                for (int k = 0; k < m; ++k) {
                    double aki = A[k][pi], akq = A[k][qi];
                    A[k][pi] = c * aki - s * akq;
                    A[k][qi] = s * aki + c * akq;
                }
            }
    }
    lmin = A[0][0];
    lmax = A[0][0];
    for (int i = 1; i < m; ++i) {
        lmin = std::min(lmin, A[i][i]);
        lmax = std::max(lmax, A[i][i]);
    }
}

}  // namespace

ConvexSurface ConvexSurface::quadratic(int d, const std::vector<double>& A,
                                       const Pt& b, double c, const Box& domain) {
    require(d >= 2 && d <= kMaxDim, "quadratic surface: d must be in [2, 4]");
    const int m = d - 1;
    require(static_cast<int>(A.size()) == m * m,
            "quadratic surface: A must be (d-1)x(d-1) row-major");
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            require(std::abs(A[i * m + j] - A[j * m + i]) < 1e-12,
                    "quadratic surface: A must be symmetric");
    double lmin = 0.0, lmax = 0.0;
    sym_eig_bounds(A.data(), m, lmin, lmax);
    require(lmin > 0.0, "quadratic surface: A must be positive definite");

    ConvexSurface s;
    s.d = d;
    s.c0 = lmin;
    s.C0 = lmax;
    s.domain = domain;
    s.strictly_convex = true;
    s.g = [A, b, c, m](const Pt& x) {
        double v = c;
        for (int i = 0; i < m; ++i) {
            v += b[i] * x[i];
            for (int j = 0; j < m; ++j) v += 0.5 * A[i * m + j] * x[i] * x[j];
        }
        return v;
    };
    s.grad = [A, b, m](const Pt& x) {
        Pt gr{};
        for (int i = 0; i < m; ++i) {
            gr[i] = b[i];
            for (int j = 0; j < m; ++j) gr[i] += A[i * m + j] * x[j];
        }
        return gr;
    };
    s.hess = [A, m](const Pt&, double* H) {
        for (int i = 0; i < m * m; ++i) H[i] = A[i];
    };
    return s;
}

ConvexSurface ConvexSurface::cosh_chart(double x0, const Box& domain) {
    ConvexSurface s;
    s.d = 2;
    s.domain = domain;
    s.strictly_convex = true;
    double lo = domain.lo[0] - x0, hi = domain.hi[0] - x0;
    double amax = std::max(std::abs(lo), std::abs(hi));
    s.c0 = (lo <= 0.0 && hi >= 0.0) ? 1.0
                                    : std::cosh(std::min(std::abs(lo), std::abs(hi)));
    s.C0 = std::cosh(amax);
    s.g = [x0](const Pt& x) { return std::cosh(x[0] - x0); };
    s.grad = [x0](const Pt& x) {
        Pt gr{};
        gr[0] = std::sinh(x[0] - x0);
        return gr;
    };
    s.hess = [x0](const Pt& x, double* H) { H[0] = std::cosh(x[0] - x0); };
    return s;
}

ConvexSurface ConvexSurface::flat(int d, const Pt& slope, double c, const Box& domain) {
    require(d >= 2 && d <= kMaxDim, "flat surface: d must be in [2, 4]");
    const int m = d - 1;
    ConvexSurface s;
    s.d = d;
    s.domain = domain;
    s.strictly_convex = false;
    s.c0 = 0.0;
    s.C0 = 0.0;
    Pt sl = slope;
    s.g = [sl, c, m](const Pt& x) {
        double v = c;
        for (int i = 0; i < m; ++i) v += sl[i] * x[i];
        return v;
    };
    s.grad = [sl](const Pt&) { return sl; };
    s.hess = [m](const Pt&, double* H) {
        for (int i = 0; i < m * m; ++i) H[i] = 0.0;
    };
    return s;
}

void ConvexSurface::validate(int samples_per_axis) const {
    require(static_cast<bool>(g) && static_cast<bool>(grad) && static_cast<bool>(hess),
            "surface: evaluators must be set");
    const int m = d - 1;
    const int n = std::max(2, samples_per_axis);
    std::array<int, kMaxDim> idx{};
    const double fd_h = 1e-4;
    while (true) {
        Pt x{};
        for (int i = 0; i < m; ++i) {
            double t = (n == 1) ? 0.5 : static_cast<double>(idx[i]) / (n - 1);
            x[i] = domain.lo[i] + t * domain.extent(i);
        }
        Pt gr = grad(x);
        for (int i = 0; i < m; ++i) {
            Pt xp = x, xm = x;
            xp[i] += fd_h;
            xm[i] -= fd_h;
            double fd = (g(xp) - g(xm)) / (2.0 * fd_h);
            require(std::abs(fd - gr[i]) <= 1e-5 * (1.0 + std::abs(gr[i]) + C0),
                    "surface: grad inconsistent with finite differences");
        }
        double H[kMaxDim * kMaxDim] = {};
        hess(x, H);
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j)
                require(std::abs(H[i * m + j] - H[j * m + i]) < 1e-10,
                        "surface: Hessian must be symmetric");
        if (strictly_convex) {
            double lmin = 0.0, lmax = 0.0;
            sym_eig_bounds(H, m, lmin, lmax);
            require(lmin >= c0 - 1e-9 * (1.0 + std::abs(c0)),
                    "surface: Hessian eigenvalue below c0");
            require(lmax <= C0 + 1e-9 * (1.0 + std::abs(C0)),
                    "surface: Hessian eigenvalue above C0");
        }
        int axis = 0;
        while (axis < m && ++idx[axis] == n) idx[axis++] = 0;
        if (axis == m) break;
    }
    if (strictly_convex) require(c0 > 0.0 && C0 >= c0, "surface: need 0 < c0 <= C0");
}

Pt surface_point(const ConvexSurface& s, const Pt& xprime) {
    Pt p{};
    for (int i = 0; i < s.d - 1; ++i) p[i] = xprime[i];
    p[s.d - 1] = s.g(xprime);
    return p;
}

TangentPlane tangent_plane(const ConvexSurface& s, const Pt& xprime) {
    TangentPlane t;
    t.point = surface_point(s, xprime);
    Pt gr = s.grad(xprime);
    double q = 1.0;
    for (int i = 0; i < s.d - 1; ++i) q += gr[i] * gr[i];
    double inv = 1.0 / std::sqrt(q);
    for (int i = 0; i < s.d - 1; ++i) t.normal[i] = -gr[i] * inv;
    t.normal[s.d - 1] = inv;
    return t;
}

HoleShape HoleShape::ball(int d, double radius) {
    require(d >= 2 && d <= kMaxDim, "hole: d must be in [2, 4]");
    require(radius > 0.0 && radius <= 1.0 + 1e-12,
            "hole: ball radius must lie in (0, 1]");
    HoleShape h;
    h.kind_ = Kind::Ball;
    h.d_ = d;
    h.radius_ = radius;
    return h;
}

HoleShape HoleShape::box(int d, const Pt& half_widths) {
    require(d >= 2 && d <= kMaxDim, "hole: d must be in [2, 4]");
    double r2 = 0.0;
    for (int i = 0; i < d; ++i) {
        require(half_widths[i] > 0.0, "hole: box half-widths must be positive");
        r2 += half_widths[i] * half_widths[i];
    }
    require(r2 <= 1.0 + 1e-9, "hole: box template must fit in the unit ball");
    HoleShape h;
    h.kind_ = Kind::Box;
    h.d_ = d;
    h.half_widths_ = half_widths;
    return h;
}

HoleShape HoleShape::polytope(int d, const std::vector<Pt>& vertices) {
    require(d == 2 || d == 3, "hole: polytope templates support d = 2 or 3");
    require(vertices.size() >= static_cast<std::size_t>(d + 1),
            "hole: polytope needs at least d+1 vertices");
    require(vertices.size() <= 64, "hole: polytope vertex list too large");
    HoleShape h;
    h.kind_ = Kind::Polytope;
    h.d_ = d;
    h.vertices_ = vertices;
    for (const Pt& v : vertices)
        require(norm2(v, d) <= 1.0 + 1e-9,
                "hole: polytope template must fit in the unit ball");

    auto add_face = [&](Pt n, double b) {
        double len = norm2(n, d);
        if (len < 1e-14) return;
        for (int i = 0; i < d; ++i) n[i] /= len;
        b /= len;
        for (const Face& f : h.faces_)
            if (std::abs(f.b - b) < 1e-10 && norm2(sub(f.n, n, d), d) < 1e-10) return;
        h.faces_.push_back({n, b});
    };

    if (d == 2) {
        for (std::size_t i = 0; i < vertices.size(); ++i)
            for (std::size_t j = i + 1; j < vertices.size(); ++j) {
                Pt e = sub(vertices[j], vertices[i], 2);
                Pt n{};
                n[0] = e[1];
                n[1] = -e[0];
                double b = dot(n, vertices[i], 2);
                double mx = -1e300;
                for (const Pt& v : vertices) mx = std::max(mx, dot(n, v, 2) - b);
                if (mx <= 1e-12 * (1.0 + std::abs(b)))
                    add_face(n, b);
                else {
                    for (int k = 0; k < 2; ++k) n[k] = -n[k];
                    b = -b;
                    mx = -1e300;
                    for (const Pt& v : vertices) mx = std::max(mx, dot(n, v, 2) - b);
                    if (mx <= 1e-12 * (1.0 + std::abs(b))) add_face(n, b);
                }
            }
    } else {
        const auto& V = vertices;
        for (std::size_t i = 0; i < V.size(); ++i)
            for (std::size_t j = i + 1; j < V.size(); ++j)
                for (std::size_t k = j + 1; k < V.size(); ++k) {
                    Pt u = sub(V[j], V[i], 3), w = sub(V[k], V[i], 3);
                    Pt n{};
                    n[0] = u[1] * w[2] - u[2] * w[1];
                    n[1] = u[2] * w[0] - u[0] * w[2];
                    n[2] = u[0] * w[1] - u[1] * w[0];
                    if (norm2(n, 3) < 1e-12) continue;
                    double b = dot(n, V[i], 3);
                    double mx = -1e300, mn = 1e300;
                    for (const Pt& v : V) {
                        double t = dot(n, v, 3) - b;
                        mx = std::max(mx, t);
                        mn = std::min(mn, t);
                    }
                    double tol = 1e-12 * (1.0 + std::abs(b));
                    if (mx <= tol)
                        add_face(n, b);
                    else if (mn >= -tol) {
                        for (int q = 0; q < 3; ++q) n[q] = -n[q];
                        add_face(n, -b);
                    }
                }
    }
    require(!h.faces_.empty(), "hole: polytope vertices are degenerate");
    return h;
}

bool HoleShape::membership(const Pt& y) const {
    return signed_distance(y) <= 1e-12;
}

double HoleShape::signed_distance(const Pt& y) const {
    switch (kind_) {
        case Kind::Ball:
            return norm2(y, d_) - radius_;
        case Kind::Box: {
            double out2 = 0.0, in = -1e300;
            for (int i = 0; i < d_; ++i) {
                double q = std::abs(y[i]) - half_widths_[i];
                if (q > 0.0) out2 += q * q;
                in = std::max(in, q);
            }
            return out2 > 0.0 ? std::sqrt(out2) : in;
        }
        case Kind::Polytope: {
            double m = -1e300;
            for (const Face& f : faces_) m = std::max(m, dot(f.n, y, d_) - f.b);
            return m;
        }
    }
    return 0.0;
}

double HoleShape::circumradius() const {
    switch (kind_) {
        case Kind::Ball:
            return radius_;
        case Kind::Box:
            return norm2(half_widths_, d_);
        case Kind::Polytope: {
            double m = 0.0;
            for (const Pt& v : vertices_) m = std::max(m, norm2(v, d_));
            return m;
        }
    }
    return 1.0;
}

double HoleShape::shadow_radius() const {
    switch (kind_) {
        case Kind::Ball:
            return radius_;
        case Kind::Box:
            return norm2(half_widths_, d_ - 1);
        case Kind::Polytope: {
            double m = 0.0;
            for (const Pt& v : vertices_) m = std::max(m, norm2(v, d_ - 1));
            return m;
        }
    }
    return 1.0;
}

double HoleShape::vertical_extent() const {
    switch (kind_) {
        case Kind::Ball:
            return radius_;
        case Kind::Box:
            return half_widths_[d_ - 1];
        case Kind::Polytope: {
            double m = 0.0;
            for (const Pt& v : vertices_) m = std::max(m, std::abs(v[d_ - 1]));
            return m;
        }
    }
    return 1.0;
}

double HoleShape::support(const Pt& nu) const {
    switch (kind_) {
        case Kind::Ball:
            return radius_ * norm2(nu, d_);
        case Kind::Box: {
            double s = 0.0;
            for (int i = 0; i < d_; ++i) s += half_widths_[i] * std::abs(nu[i]);
            return s;
        }
        case Kind::Polytope: {
            double m = -1e300;
            for (const Pt& v : vertices_) m = std::max(m, dot(v, nu, d_));
            return m;
        }
    }
    return 0.0;
}

std::optional<std::pair<double, double>> HoleShape::z_range(const Pt& xprime) const {
    switch (kind_) {
        case Kind::Ball: {
            double r2 = radius_ * radius_ - dot(xprime, xprime, d_ - 1);
            if (r2 < 0.0) return std::nullopt;
            double r = std::sqrt(r2);
            return std::make_pair(-r, r);
        }
        case Kind::Box: {
            for (int i = 0; i < d_ - 1; ++i)
                if (std::abs(xprime[i]) > half_widths_[i]) return std::nullopt;
            return std::make_pair(-half_widths_[d_ - 1], half_widths_[d_ - 1]);
        }
        case Kind::Polytope: {
            double zlo = -1e300, zhi = 1e300;
            for (const Face& f : faces_) {
                double nz = f.n[d_ - 1];
                double rest = f.b - dot(f.n, xprime, d_ - 1);
                if (std::abs(nz) < 1e-12) {
                    if (rest < -1e-12) return std::nullopt;
                } else if (nz > 0.0) {
                    zhi = std::min(zhi, rest / nz);
                } else {
                    zlo = std::max(zlo, rest / nz);
                }
            }
            if (zlo > zhi + 1e-12) return std::nullopt;
            if (zlo > zhi) zlo = zhi = 0.5 * (zlo + zhi);
            return std::make_pair(zlo, zhi);
        }
    }
    return std::nullopt;
}

SieveConfig SieveConfig::critical(double eps, int d, double p) {
    double a = critical_hole_size(eps, d, p);
    return with_hole_size(eps, a, d, p);
}

SieveConfig SieveConfig::with_hole_size(double eps, double a, int d, double p) {
    require(eps > 0.0, "sieve: eps must be positive");
    require(d >= 2 && d <= kMaxDim, "sieve: d must be in [2, 4]");
    require(p > 1.0 && p < static_cast<double>(d), "sieve: need 1 < p < d");
    require(a > 0.0, "sieve: hole size must be positive");
    require(a < eps / 2.0, "sieve: hole size must stay below eps/2 "
                           "(holes would touch cell boundaries)");
    return SieveConfig{eps, a, d, p};
}

LatticeRange LatticeRange::over(const Box& box, double eps) {
    LatticeRange r;
    r.dims = box.d;
    for (int i = 0; i < box.d; ++i) {
        r.kmin[i] = static_cast<std::int64_t>(std::ceil(box.lo[i] / eps - 1e-9));
        r.kmax[i] = static_cast<std::int64_t>(std::floor(box.hi[i] / eps - 1e-9));
    }
    return r;
}

std::int64_t LatticeRange::count() const {
    std::int64_t n = 1;
    for (int i = 0; i < dims; ++i) {
        if (kmax[i] < kmin[i]) return 0;
        n *= kmax[i] - kmin[i] + 1;
    }
    return n;
}

namespace {

// Scan the hole's shadow for a surface point inside the vertical slice of
// the hole; fall back to a bisection between an above- and a below-sample.
std::optional<Pt> confirm_hit(const ConvexSurface& s, const SieveConfig& sv,
                              const HoleShape& hole, const CellIndex& cell,
                              const HitEnumerationOptions& opts) {
    const int m = s.d - 1;
    const double a = sv.a;
    Pt center{};
    for (int i = 0; i < m; ++i) center[i] = sv.eps * static_cast<double>(cell.k[i]);
    const double zc = sv.eps * static_cast<double>(cell.k[m]);
    const double rsh = a * hole.shadow_radius();

    auto slice_at = [&](const Pt& xp) -> std::optional<std::pair<double, double>> {
        Pt local{};
        for (int i = 0; i < m; ++i) local[i] = (xp[i] - center[i]) / a;
        auto z = hole.z_range(local);
        if (!z) return std::nullopt;
        return std::make_pair(zc + a * z->first, zc + a * z->second);
    };

    const int n = std::max(3, opts.samples_per_axis);
    std::array<int, kMaxDim> idx{};
    bool have_above = false, have_below = false;
    Pt above{}, below{};
    while (true) {
        Pt xp{};
        for (int i = 0; i < m; ++i)
            xp[i] = center[i] - rsh + 2.0 * rsh * idx[i] / (n - 1);
        auto z = slice_at(xp);
        if (z) {
            double gv = s.g(xp);
            if (gv >= z->first && gv <= z->second) {
                Pt w{};
                for (int i = 0; i < m; ++i) w[i] = xp[i];
                w[m] = gv;
                return w;
            }
            if (gv > z->second && !have_above) {
                have_above = true;
                above = xp;
            }
            if (gv < z->first && !have_below) {
                have_below = true;
                below = xp;
            }
        }
        int axis = 0;
        while (axis < m && ++idx[axis] == n) idx[axis++] = 0;
        if (axis == m) break;
    }
    if (!(have_above && have_below)) return std::nullopt;

    // g - zmid changes sign between the two samples; its root lies inside the
    // slice because zmid is strictly between the slice faces.
    Pt lo = below, hi = above;
    for (int it = 0; it < opts.bisection_steps; ++it) {
        Pt mid{};
        for (int i = 0; i < m; ++i) mid[i] = 0.5 * (lo[i] + hi[i]);
        auto z = slice_at(mid);
        if (!z) return std::nullopt;  // shadow is convex; defensive only
        double gv = s.g(mid);
        if (gv >= z->first && gv <= z->second) {
            Pt w{};
            for (int i = 0; i < m; ++i) w[i] = mid[i];
            w[m] = gv;
            return w;
        }
        if (gv > z->second)
            hi = mid;
        else
            lo = mid;
    }
    return std::nullopt;
}

}  // namespace

std::vector<HitCell> enumerate_hit_cells(const ConvexSurface& s,
                                         const SieveConfig& sieve,
                                         const HoleShape& hole,
                                         const Box& qprime,
                                         const HitEnumerationOptions& opts) {
    require(s.d == sieve.d, "enumerate_hit_cells: surface and sieve dimension differ");
    require(hole.dim() == s.d, "enumerate_hit_cells: hole and surface dimension differ");
    require(qprime.d == s.d - 1, "enumerate_hit_cells: qprime must be (d-1)-dimensional");

    const int m = s.d - 1;
    const double eps = sieve.eps, a = sieve.a;
    const double rsh = a * hole.shadow_radius();
    const double vert = a * hole.vertical_extent();
    LatticeRange lat = LatticeRange::over(qprime, eps);
    std::vector<HitCell> out;
    if (lat.count() == 0) return out;

    std::array<std::int64_t, kMaxDim> k{};
    for (int i = 0; i < m; ++i) k[i] = lat.kmin[i];
    while (true) {
        Pt xc{};
        for (int i = 0; i < m; ++i) xc[i] = eps * static_cast<double>(k[i]);
        double g0 = s.g(xc);
        Pt gr = s.grad(xc);
        double slope = norm2(gr, m);
        double margin = 1e-9 * (1.0 + std::abs(g0));
        double glo = g0 - slope * rsh - margin;
        double ghi = g0 + slope * rsh + 0.5 * s.C0 * rsh * rsh + margin;
        auto kd_lo = static_cast<std::int64_t>(std::ceil((glo - vert) / eps - 1e-9));
        auto kd_hi = static_cast<std::int64_t>(std::floor((ghi + vert) / eps + 1e-9));
        for (std::int64_t kd = kd_lo; kd <= kd_hi; ++kd) {
            CellIndex ci;
            ci.d = s.d;
            for (int i = 0; i < m; ++i) ci.k[i] = k[i];
            ci.k[m] = kd;
            if (auto w = confirm_hit(s, sieve, hole, ci, opts))
                out.push_back(HitCell{ci, *w});
        }
        int axis = 0;
        while (axis < m && ++k[axis] > lat.kmax[axis]) k[axis] = lat.kmin[axis], ++axis;
        if (axis == m) break;
    }
    std::sort(out.begin(), out.end(),
              [](const HitCell& x, const HitCell& y) { return x.index < y.index; });
    return out;
}

}  // namespace sievehom
