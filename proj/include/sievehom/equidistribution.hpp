#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sievehom/geometry.hpp"
#include "sievehom/util.hpp"

namespace sievehom {

// Interval on the unit torus. Default flags give [lo, hi); discrepancy
// witnesses use the flags to report (a, b] or open intervals. A value of 0
// is identified with 1 when the right endpoint is 1 and closed.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool lo_closed = true;
    bool hi_closed = false;

    double length() const { return hi - lo; }
    bool contains_mod1(double v) const;
};

struct SampleProvenance {
    double eps = 0.0;
    Box qprime;
    std::string generator;
};

// Finite multiset of values in [0, 1).
struct ModOneSample {
    std::vector<double> values;
    SampleProvenance provenance;

    std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
    void validate() const;
};

// Values frac(g(eps k') / eps) for lattice points eps k' in qprime
// (half-open), in lexicographic k' order.
ModOneSample surface_sequence(const ConvexSurface& s, double eps, const Box& qprime);

struct DiscrepancyReport {
    double value = 0.0;   // extreme (two-sided) discrepancy
    double star = 0.0;    // star discrepancy, secondary statistic
    std::int64_t n = 0;
    Interval witness;     // interval family attaining the sup (as a limit)
    bool witness_overfilled = true;
};

// Exact extreme discrepancy via the sorted-sample closed formula
//   D_N = 1/N + max_j (j/N - x_(j)) - min_j (j/N - x_(j)).
DiscrepancyReport discrepancy_exact(const ModOneSample& sample);
DiscrepancyReport discrepancy_exact(std::vector<double> values);

// |sum_j exp(2 pi i k x_j)| for k = 1..kmax, compensated accumulation.
std::vector<double> exp_sum_moduli(const std::vector<double>& values, int kmax);

// Erdos-Turan: D_N <= 1/n + (1/N) sum_{k<=n} |S_k| / k.
double erdos_turan_bound(const ModOneSample& sample, int n = 0);
double erdos_turan_bound(const std::vector<double>& values, int n = 0);
// Same bound evaluated from precomputed |S_k| (moduli[k-1] = |S_k|).
double et_bound_from_moduli(const std::vector<double>& moduli, int n,
                            std::int64_t N);

// Second-derivative exponential-sum estimate: with F'' >= rho > 0 on [a, b],
//   |sum_{j=a..b} e^{2 pi i F(j)}| <= (|F'(b) - F'(a)| + 2)(3 + 1/sqrt(rho)).
struct ExpSumBoundInput {
    double k = 1.0;     // frequency multiplier, F_k = k f
    double Fpa = 0.0;   // F_k'(a)
    double Fpb = 0.0;   // F_k'(b)
    double rho = 0.0;   // uniform lower bound for F_k''
};
double erdos_koksma_sum_bound(const ExpSumBoundInput& in);

struct DeviationReport {
    double deviation = 0.0;  // |A/N - |I||
    std::int64_t count = 0;  // A
    std::int64_t n = 0;      // N
};

// Counting deviation |A/N - |I|| of a sample against a fixed interval.
DeviationReport interval_deviation(const ModOneSample& sample, const Interval& I);

struct DecayFit {
    double alpha = 0.0;         // fitted exponent in dev ~ C eps^alpha
    double C = 0.0;
    double max_log_residual = 0.0;
    int used = 0;
    int dropped = 0;            // nonpositive deviations excluded from the fit
};

// Least squares on (log eps, log dev).
DecayFit decay_fit(const std::vector<double>& eps, const std::vector<double>& dev);

// Split qprime along its first axis: one sub-sample per lattice value of the
// remaining coordinates. The union of fibers equals surface_sequence.
std::vector<ModOneSample> fiber_decompose(const ConvexSurface& s, double eps,
                                          const Box& qprime);

}  // namespace sievehom
