// Internal minimization core shared by the capacity and homogenization
// solvers.  Energy on a grid field w:
//
//   E(w) = scale * sum_cells (|grad_h w|^2 + mu^2)^{p/2} h^d
//          - sum_nodes source_j w_j h^d  + extra(w)
//
// where grad_h uses forward differences from each cell's lower corner.
// Dirichlet nodes keep the value stored in w; free nodes may carry a lower
// bound (thin obstacle).  p == 2 without bounds or extra terms goes through
// conjugate gradients; everything else through a preconditioned spectral
// projected gradient method with nonmonotone line search and mu-continuation.
#pragma once

#include <vector>

#include "sievehom/capacity.hpp"
#include "sievehom/grid.hpp"

namespace sievehom::detail {

// Additional smooth convex energy term (e.g. a facet penalty on a surface).
class ExtraTerm {
  public:
    virtual ~ExtraTerm() = default;
    virtual double energy(const std::vector<double>& w) const = 0;
    virtual void add_gradient(const std::vector<double>& w, std::vector<double>& g) const = 0;
    virtual void add_diagonal(const std::vector<double>& w, std::vector<double>& D) const = 0;
};

struct MinimizeProblem {
    const GridSpec* grid = nullptr;
    double p = 2.0;
    double scale = 1.0;                              // multiplies the p-term
    const std::vector<unsigned char>* fixed = nullptr;  // 1 = Dirichlet
    const std::vector<double>* source = nullptr;        // nullable
    const std::vector<double>* lower = nullptr;         // nullable lower bounds
    const std::vector<unsigned char>* has_bound = nullptr;  // nullable mask
    const ExtraTerm* extra = nullptr;                   // nullable
};

struct MinimizeResult {
    int iterations = 0;
    double residual = 0.0;
    double energy = 0.0;  // full energy at mu = 0 (including source and extra)
};

// Minimizes in place; w enters with Dirichlet values set and a feasible guess.
MinimizeResult minimize(const MinimizeProblem& prob, const SolverOptions& opts,
                        std::vector<double>& w);

// sum_cells (|grad_h w|^2 + mu^2)^{p/2} h^d  (the p-term alone, no `scale`).
double cell_energy(const GridSpec& grid, double p, double mu, const std::vector<double>& w);

}  // namespace sievehom::detail
