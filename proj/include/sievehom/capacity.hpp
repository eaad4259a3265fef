// Variational p-capacity on uniform grids.
//
// Capacity of a compact set E inside a large ball: minimize the p-Dirichlet
// energy  sum_cells (|grad_h w|^2 + mu^2)^{p/2} h^d  over nodal fields with
// w = 1 within h/2 of E and w = 0 on and beyond the outer boundary.  The
// reported value is always the mu = 0 energy of the returned potential.
#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "sievehom/geometry.hpp"
#include "sievehom/grid.hpp"

namespace sievehom {

// A set that can answer "is this point within tol of me" plus a bounding box.
// Volumetric sets use their signed distance; codimension-one sets combine a
// normal-distance test with an in-set test of the projected foot point.
class Region {
  public:
    virtual ~Region() = default;
    virtual bool marked(const Pt& y, double tol) const = 0;
    virtual Box bounding_box() const = 0;
    virtual int dim() const = 0;
};

// Hole template scaled by `scale` about `center` (volumetric).
class ScaledHole : public Region {
  public:
    ScaledHole(HoleShape shape, double scale, Pt center);
    bool marked(const Pt& y, double tol) const override;
    Box bounding_box() const override;
    int dim() const override { return shape_.dim(); }

  private:
    HoleShape shape_;
    double scale_;
    Pt center_;
};

// Flat plate: the intersection of the scaled hole with the hyperplane
// {u . nu = t} in template coordinates.  A node is marked when its normal
// distance is at most tol and its foot point lies in the template.
class SlicePlate : public Region {
  public:
    SlicePlate(HoleShape shape, double scale, Pt center, Pt nu, double t);
    bool marked(const Pt& y, double tol) const override;
    Box bounding_box() const override;
    int dim() const override { return shape_.dim(); }
    bool empty() const;  // the plane misses the template entirely

  private:
    HoleShape shape_;
    double scale_;
    Pt center_;
    Pt nu_;
    double t_;
};

// Piece of the graph y_d = g(y') over a chart window, optionally clipped to
// a hole template in local coordinates ((y - window_center)/window_scale).
class GraphPatch : public Region {
  public:
    GraphPatch(const ConvexSurface& s, Box window);
    GraphPatch(const ConvexSurface& s, Box window, HoleShape clip, double clip_scale, Pt clip_center);
    bool marked(const Pt& y, double tol) const override;
    Box bounding_box() const override;
    int dim() const override { return d_; }

  private:
    const ConvexSurface* s_;
    Box window_;
    int d_;
    std::optional<HoleShape> clip_;
    double clip_scale_ = 1.0;
    Pt clip_center_{};
};

// Piece of the hyperplane through `point` with unit normal `normal`,
// clipped to a hole template like GraphPatch.
class PlanePatch : public Region {
  public:
    PlanePatch(int d, Pt point, Pt normal, HoleShape clip, double clip_scale, Pt clip_center);
    bool marked(const Pt& y, double tol) const override;
    Box bounding_box() const override;
    int dim() const override { return d_; }

  private:
    int d_;
    Pt point_;
    Pt normal_;
    HoleShape clip_;
    double clip_scale_;
    Pt clip_center_;
};

enum class OuterBoundary {
    Sphere,  // w = 0 on every node with |y| >= R (capacity in a ball)
    Box,     // w = 0 on the faces of [-R, R]^d (periodic cell problems)
};

struct SolverOptions {
    double tol = 1e-7;                               // stationarity target
    int max_iter = 5000;                             // per continuation stage
    std::vector<double> mu_schedule{1e-2, 1e-4, 1e-6};  // p != 2 smoothing
    double cg_tol = 1e-8;                            // p == 2 relative residual
    bool throw_on_stall = false;                     // else report residual
    Pt grid_shift{};  // origin offset, |shift_i| <= h; used for phase averaging
};

struct GridSolve {
    double value = 0.0;  // mu = 0 energy of `potential`
    Field potential;
    std::size_t marked_nodes = 0;
    int iterations = 0;
    double residual = 0.0;
};

// Single-grid solve: Dirichlet 1 on nodes with region.marked(y, h/2),
// Dirichlet 0 per `outer` with half-width R, free nodes elsewhere.
GridSolve solve_on_grid(double p, const Region& region, double R, int cells,
                        OuterBoundary outer = OuterBoundary::Sphere,
                        const SolverOptions& opts = {});

struct CapacityEstimate {
    double value = 0.0;           // extrapolated
    std::vector<double> levels;   // raw values, coarse to fine
    double order = 0.0;           // fitted convergence order (0 if < 3 levels)
    GridSolve finest;
};

// Solve at cells, 2*cells, ..., then Richardson-extrapolate.  With three or
// more levels the order is fitted from successive differences and clamped
// to [0.5, 3]; with two levels first order is assumed.
CapacityEstimate capacity_with_refinement(double p, const Region& region, double R,
                                          int base_cells, int levels,
                                          OuterBoundary outer = OuterBoundary::Sphere,
                                          const SolverOptions& opts = {});

// Checks cap(tE) against t^(d-p) cap(E) on independently sized grids.
struct ScalingCheck {
    double value_scaled = 0.0;    // cap(tE)
    double value_predicted = 0.0; // t^(d-p) cap(E)
    double relative_error = 0.0;
};
ScalingCheck scaling_check(double p, const HoleShape& shape, double t, double R,
                           int cells_scaled, int cells_unit,
                           const SolverOptions& opts = {});

// Capacity of the slice of `shape` by the plane {u . nu = t} (template
// coordinates, unit scale), solved in the ambient dimension.
double slice_capacity(double p, const HoleShape& shape, const Pt& nu, double t,
                      double R, int cells, const SolverOptions& opts = {});

// Mean capacity: integral over t of the slice capacities, evaluated with
// adaptive Simpson quadrature (|t| beyond the support contributes zero).
struct MeanCapacityResult {
    double value = 0.0;
    int evaluations = 0;  // distinct slice solves
};
MeanCapacityResult mean_capacity(double p, const HoleShape& shape, const Pt& nu,
                                 double R, int cells, double quad_tol = 0.01,
                                 const SolverOptions& opts = {});

// Unit cell problem: capacity of the template at the critical scale, solved
// in template coordinates inside the box of half-width R_cell = eps/(2a).
// `physical` rescales by a^(d-p).  When R_cell < 2 the template is no longer
// small next to the cell and `cramped` is set.
struct CellCapacity {
    double unit = 0.0;
    double physical = 0.0;
    double cell_halfwidth = 0.0;
    bool cramped = false;
};
CellCapacity cell_capacity(const SieveConfig& sieve, const HoleShape& shape,
                           int cells, const SolverOptions& opts = {});

// Capacity of the surface/hole intersection for one sieve cell k: the chart
// is rescaled to template coordinates around the cell center and solved
// against the outer sphere of radius R_cell (with optional refinement
// levels).  `unit` bounds cell_capacity(sieve, shape, ...).unit from above
// by inclusion.
CellCapacity cell_capacity(const ConvexSurface& s, const SieveConfig& sieve,
                           const HoleShape& shape, const CellIndex& k, int cells,
                           int levels = 1, const SolverOptions& opts = {});

// Gap between the capacity of (hole intersect surface) and (hole intersect
// tangent plane at the hole center), both in template coordinates.  The two
// problems are solved pairwise on a deterministic ladder of grid-origin
// phases (a Kronecker sequence scaled by h) and the gap is the mean absolute
// paired difference: identical marked sets cancel exactly, so sub-grid
// deviations between surface and plane are resolved in expectation instead
// of being quantized away by the marking rule.
struct TangentGap {
    double cap_surface = 0.0;  // phase-ladder mean
    double cap_tangent = 0.0;  // phase-ladder mean
    double gap = 0.0;          // mean |cap_surface - cap_tangent| over phases
};
TangentGap tangent_approx_gap(const ConvexSurface& s, const Pt& x0prime, double a,
                              const HoleShape& shape, double p, double R, int cells,
                              const SolverOptions& opts = {}, int phase_samples = 12);

// Gap between central-slice capacities for two plane directions, solved
// pairwise over a grid-origin phase ladder.  `gap` is |mean(cap_a - cap_b)|,
// so marking jitter common to both directions cancels in expectation and
// rotation-invariant templates report a near-zero gap.
struct TiltGap {
    double cap_a = 0.0;  // phase-ladder means
    double cap_b = 0.0;
    double gap = 0.0;
};
TiltGap plane_tilt_gap(double p, const HoleShape& shape, const Pt& nu_a, const Pt& nu_b,
                       double R, int cells, const SolverOptions& opts = {},
                       int phase_samples = 8);

// Compares the computed ball potential with the exact power-law far field
// W(y) = (|y|/r)^(-(d-p)/(p-1)) on the annulus 2r <= |y| <= 3r.
struct FarFieldCheck {
    double max_deviation = 0.0;
    double tolerance = 0.0;  // 2 h sup|grad W| over the annulus + truncation
    bool within = false;
};
FarFieldCheck farfield_bound_check(int d, double p, double ball_radius, double R,
                                   int cells, const SolverOptions& opts = {});

// Energy of a nodal field at mu = 0 (the value reported by every solve).
double p_dirichlet_energy(const Field& w, double p);

}  // namespace sievehom
