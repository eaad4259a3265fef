#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "sievehom/util.hpp"

namespace sievehom {

/// Critical hole size a_eps = eps^{d/(d-p+1)} for the periodic sieve.
/// Requires eps > 0 and 1 < p < d.
double critical_hole_size(double eps, int d, double p);

// Convex hypersurface given as the graph x_d = g(x') over a (d-1)-box.
// c0 and C0 are uniform spectral bounds for the Hessian of g on the domain;
// flat fixtures set c0 = 0 and skip the convexity check.
struct ConvexSurface {
    int d = 2;
    std::function<double(const Pt&)> g;
    std::function<Pt(const Pt&)> grad;   // d-1 components
    std::function<void(const Pt&, double*)> hess;  // row-major (d-1)x(d-1)
    double c0 = 0.0;
    double C0 = 0.0;
    Box domain;          // (d-1)-dimensional chart box
    bool strictly_convex = true;

    // Quadratic graph g(x') = x'^T A x' / 2 + b . x' + c; spectral bounds of A
    // are computed exactly (Jacobi sweeps on the (d-1)x(d-1) symmetric matrix).
    static ConvexSurface quadratic(int d, const std::vector<double>& A,
                                   const Pt& b, double c, const Box& domain);
    // d = 2 chart g(x) = cosh(x - x0); bounds are cosh evaluated at the
    // domain endpoints.
    static ConvexSurface cosh_chart(double x0, const Box& domain);
    // Affine graph g(x') = s . x' + c. Degenerate (c0 = 0), convexity check
    // disabled; used by flat test fixtures.
    static ConvexSurface flat(int d, const Pt& s, double c, const Box& domain);

    // Samples the chart and checks grad/hess consistency and the spectral
    // bounds; throws ValidationError on failure.
    void validate(int samples_per_axis = 5) const;
};

struct TangentPlane {
    Pt point{};   // point on the surface, d coords
    Pt normal{};  // unit normal with positive last component
};

Pt surface_point(const ConvexSurface& s, const Pt& xprime);
TangentPlane tangent_plane(const ConvexSurface& s, const Pt& xprime);

// Hole template T: compact convex subset of the closed unit ball. The sieve
// places a copy eps*k + a_eps*T in every lattice cell.
class HoleShape {
  public:
    enum class Kind { Ball, Box, Polytope };

    static HoleShape ball(int d, double radius);
    static HoleShape box(int d, const Pt& half_widths);
    // Convex hull of the given vertices (d = 2 or 3).
    static HoleShape polytope(int d, const std::vector<Pt>& vertices);

    Kind kind() const { return kind_; }
    int dim() const { return d_; }

    bool membership(const Pt& y) const;
    // Negative inside, positive outside. Exact for ball/box; for polytopes it
    // is the max of face-plane distances (exact inside, a lower bound outside,
    // with the same zero sub-level set).
    double signed_distance(const Pt& y) const;
    // max |y| over T
    double circumradius() const;
    // max |y'| over T (projection onto the first d-1 coordinates)
    double shadow_radius() const;
    // max |y_d| over T
    double vertical_extent() const;
    // sup_{y in T} y . nu
    double support(const Pt& nu) const;
    // Vertical slice {z : (xprime, z) in T}; empty optional when the column
    // misses the shadow.
    std::optional<std::pair<double, double>> z_range(const Pt& xprime) const;

  private:
    Kind kind_ = Kind::Ball;
    int d_ = 3;
    double radius_ = 1.0;           // ball
    Pt half_widths_{};              // box
    std::vector<Pt> vertices_;      // polytope
    struct Face { Pt n; double b; };
    std::vector<Face> faces_;       // polytope, unit outward normals
};

// Lattice sieve parameters. The invariant a < eps/2 keeps holes strictly
// inside their cells and is a hard reject.
struct SieveConfig {
    double eps = 0.0;
    double a = 0.0;
    int d = 0;
    double p = 0.0;

    static SieveConfig critical(double eps, int d, double p);
    static SieveConfig with_hole_size(double eps, double a, int d, double p);
};

struct CellIndex {
    int d = 0;
    std::array<std::int64_t, kMaxDim> k{};

    bool operator==(const CellIndex&) const = default;
    bool operator<(const CellIndex& o) const {
        for (int i = 0; i < d; ++i)
            if (k[i] != o.k[i]) return k[i] < o.k[i];
        return false;
    }
};

struct HitCell {
    CellIndex index;
    Pt witness{};  // a point of the surface inside the hole, d coords
};

struct HitEnumerationOptions {
    int samples_per_axis = 9;    // shadow scan resolution per axis
    int bisection_steps = 80;
};

// All lattice cells k with eps*k' in qprime (half-open per coordinate) whose
// hole eps*k + a*T meets the surface. Candidates come from convexity-based
// vertical bracketing; each returned cell carries a bisection witness.
// Output is sorted lexicographically in k.
std::vector<HitCell> enumerate_hit_cells(const ConvexSurface& s,
                                         const SieveConfig& sieve,
                                         const HoleShape& hole,
                                         const Box& qprime,
                                         const HitEnumerationOptions& opts = {});

// Inclusive lattice index range per axis for {k : eps*k in [lo, hi)}.
struct LatticeRange {
    std::array<std::int64_t, kMaxDim> kmin{};
    std::array<std::int64_t, kMaxDim> kmax{};
    int dims = 0;

    static LatticeRange over(const Box& box, double eps);
    std::int64_t count() const;
};

}  // namespace sievehom
