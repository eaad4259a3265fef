#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "sievehom/capacity.hpp"
#include "sievehom/geometry.hpp"
#include "sievehom/grid.hpp"

namespace sievehom {

// Thin obstacle problem on a periodic sieve: minimize
//   integral |grad v|^p + integral h v   over v in W^{1,p}_0(domain)
// subject to v >= obstacle on the surface/sieve intersection, and its
// homogenized limit where the constraint is replaced by the facet-measure
// penalty  integral |(obstacle - v)_+|^p dmu  along the surface.
struct ObstacleProblemSpec {
    int d = 2;
    double p = 1.3;
    Box domain;              // axis-aligned, Dirichlet-0 boundary
    ConvexSurface surface;   // graph over the first d-1 axes
    HoleShape shape = HoleShape::ball(2, 1.0);
    double hole_prefactor = 1.0;  // a = prefactor * critical size
    double grid_h = 0.0;          // target spacing; 0 lets the solver pick
    int max_cells = 1024;         // per-axis cap on the grid
    std::function<double(const Pt&)> source;    // null reads as 0
    std::function<double(const Pt&)> obstacle;  // null reads as 0

    void validate() const;
    SieveConfig sieve_at(double eps) const;
};

// Discretization of the limit measure cap_{p,nu(x)} dH^{d-1} restricted to
// the surface inside the domain: one facet per chart patch of diameter at
// most delta, small enough that the normal varies by at most delta across
// it.
struct FacetEntry {
    Pt centroid{};    // on the surface, d coords
    Pt normal{};      // unit normal at the centroid
    double weight = 0.0;  // surface measure of the facet
    double cap = 0.0;     // mean capacity of the template for this normal
};
struct LimitMeasureTable {
    std::vector<FacetEntry> facets;
    double total_weight() const;   // ~ H^{d-1}(surface inside domain)
    double total_measure() const;  // sum weight * cap
};

// Builds the facet table. Mean capacities are cached by quantized normal
// (step delta/4); a ball template is solved once since every direction is
// equivalent. cap_R/cap_cells/quad_tol parameterize the per-normal
// mean-capacity solves.
LimitMeasureTable build_limit_measure(const ConvexSurface& s, const HoleShape& shape,
                                      double p, const Box& domain, double delta,
                                      double cap_R, int cap_cells, double quad_tol,
                                      const SolverOptions& opts = {});

struct ObstacleSolution {
    Field u;
    double energy_gradient = 0.0;  // integral |grad u|^p
    double energy_obstacle = 0.0;  // facet penalty (homogenized solves only)
    double energy_source = 0.0;    // integral h u
    double energy_total = 0.0;     // sum of the three parts
    std::size_t constrained_nodes = 0;
    int iterations = 0;
    double residual = 0.0;
};

// Discrete engine shared by both solvers: minimizes the p-energy plus source
// term over fields vanishing on the grid boundary, with u >= phi enforced
// exactly on the masked nodes. `source` and `phi` are nodal samples (either
// may be empty meaning 0).
ObstacleSolution solve_obstacle_masked(const GridSpec& grid,
                                       const std::vector<unsigned char>& marked,
                                       const std::vector<double>& phi,
                                       const std::vector<double>& source, double p,
                                       const SolverOptions& opts = {});

// Perforated problem at sieve scale eps: the obstacle acts on nodes within
// h/2 of the surface whose chart projection falls inside a hole of the
// sieve. Uses grid-h continuation (coarse solve interpolated as the warm
// start of the next finer grid).
ObstacleSolution solve_perforated(const ObstacleProblemSpec& spec, double eps,
                                  const SolverOptions& opts = {});

// Homogenized problem: unconstrained minimization with the facet penalty
// sum_f cap_f weight_f |(phi(x_f) - v(x_f))_+|^p, v interpolated at facet
// centroids. Requires spec.grid_h > 0.
ObstacleSolution solve_homogenized(const ObstacleProblemSpec& spec,
                                   const LimitMeasureTable& table,
                                   const SolverOptions& opts = {});

// Corrector energies: per hit cell of the sieve inside the box Q, the cell
// problem is solved in template coordinates and rescaled; `total` sums the
// physical energies. With quantize_offsets (flat charts only) congruent
// cells share one solve keyed by the quantized vertical offset.
struct CorrectorCell {
    CellIndex index;
    double offset = 0.0;    // chart height over the cell center, template units
    double unit = 0.0;      // capacity in template coordinates
    double physical = 0.0;  // a^(d-p) * unit
};
struct CorrectorEnergy {
    double total = 0.0;
    double per_volume = 0.0;  // total / |Q|, the compactness constant
    std::size_t n_cells = 0;
    std::size_t distinct_solves = 0;
    std::vector<CorrectorCell> cells;
};
CorrectorEnergy corrector_energy(const ConvexSurface& s, const SieveConfig& sieve,
                                 const HoleShape& shape, const Box& Q, int cells,
                                 int levels = 1, bool quantize_offsets = false,
                                 const SolverOptions& opts = {});

// Sweep over eps: solves the perforated problem per eps on the shared grid
// (spec.grid_h), the homogenized problem once, and reports L^p distances and
// energies.
struct ConvergenceRow {
    double eps = 0.0;
    double a_eps = 0.0;
    double lp_distance = 0.0;
    double energy_perforated = 0.0;
    double energy_hom = 0.0;
    std::size_t n_hit_cells = 0;
};
struct ConvergenceReport {
    std::vector<ConvergenceRow> rows;
    ObstacleSolution limit;  // the homogenized solution
};
ConvergenceReport convergence_experiment(const ObstacleProblemSpec& spec,
                                         const std::vector<double>& eps_list,
                                         const LimitMeasureTable& table,
                                         const SolverOptions& opts = {});

// L^p norm of the nodal difference of two fields on the same grid.
double lp_distance(const Field& a, const Field& b, double p);

}  // namespace sievehom
