#include "sievehom/equidistribution.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sievehom {

bool Interval::contains_mod1(double v) const {
    double x = frac(v);
    // 0 and 1 are the same torus point; fold 0 up when the interval ends at 1.
    if (x == 0.0 && hi >= 1.0 && hi_closed) return true;
    if (x < lo || (x == lo && !lo_closed)) return false;
    if (x > hi || (x == hi && !hi_closed)) return false;
    return true;
}

void ModOneSample::validate() const {
    for (double v : values)
        require(v >= 0.0 && v < 1.0, "sample: values must lie in [0, 1)");
}

ModOneSample surface_sequence(const ConvexSurface& s, double eps, const Box& qprime) {
    require(eps > 0.0, "surface_sequence: eps must be positive");
    require(qprime.d == s.d - 1, "surface_sequence: qprime must be (d-1)-dimensional");
    LatticeRange lat = LatticeRange::over(qprime, eps);
    ModOneSample out;
    out.provenance = {eps, qprime, "surface_sequence"};
    if (lat.count() == 0) return out;
    out.values.reserve(static_cast<std::size_t>(lat.count()));

    const int m = qprime.d;
    std::array<std::int64_t, kMaxDim> k{};
    for (int i = 0; i < m; ++i) k[i] = lat.kmin[i];
    // Lexicographic order: last axis varies fastest.
    while (true) {
        Pt xp{};
        for (int i = 0; i < m; ++i) xp[i] = eps * static_cast<double>(k[i]);
        out.values.push_back(frac(s.g(xp) / eps));
        int axis = m - 1;
        while (axis >= 0 && ++k[axis] > lat.kmax[axis]) k[axis] = lat.kmin[axis], --axis;
        if (axis < 0) break;
    }
    return out;
}

DiscrepancyReport discrepancy_exact(const ModOneSample& sample) {
    sample.validate();
    return discrepancy_exact(sample.values);
}

DiscrepancyReport discrepancy_exact(std::vector<double> values) {
    require(!values.empty(), "discrepancy: sample must be nonempty");
    const auto N = static_cast<std::int64_t>(values.size());
    std::sort(values.begin(), values.end());

    DiscrepancyReport rep;
    rep.n = N;
    double tmax = -1e300, tmin = 1e300, smax = 0.0;
    std::int64_t jmax = 0, jmin = 0;
    for (std::int64_t j = 1; j <= N; ++j) {
        double x = values[static_cast<std::size_t>(j - 1)];
        double t = static_cast<double>(j) / N - x;
        if (t > tmax) tmax = t, jmax = j;
        if (t < tmin) tmin = t, jmin = j;
        smax = std::max(smax, std::max(t, x - static_cast<double>(j - 1) / N));
    }
    rep.value = 1.0 / static_cast<double>(N) + tmax - tmin;
    rep.star = smax;
    if (jmin <= jmax) {
        // over-filled family [x_(jmin), x_(jmax)] (left endpoint as a limit)
        rep.witness = {values[static_cast<std::size_t>(jmin - 1)],
                       values[static_cast<std::size_t>(jmax - 1)], true, true};
        rep.witness_overfilled = true;
    } else {
        // under-filled open family (x_(jmax), x_(jmin))
        rep.witness = {values[static_cast<std::size_t>(jmax - 1)],
                       values[static_cast<std::size_t>(jmin - 1)], false, false};
        rep.witness_overfilled = false;
    }
    return rep;
}

std::vector<double> exp_sum_moduli(const std::vector<double>& values, int kmax) {
    require(kmax >= 1, "exp_sum_moduli: kmax must be at least 1");
    std::vector<double> out(static_cast<std::size_t>(kmax));
    for (int k = 1; k <= kmax; ++k) {
        Accum re, im;
        for (double v : values) {
            double ang = 2.0 * std::numbers::pi * k * v;
            re.add(std::cos(ang));
            im.add(std::sin(ang));
        }
        out[static_cast<std::size_t>(k - 1)] = std::hypot(re.value(), im.value());
    }
    return out;
}

double et_bound_from_moduli(const std::vector<double>& moduli, int n, std::int64_t N) {
    require(n >= 1, "erdos_turan_bound: n must be at least 1");
    require(static_cast<std::size_t>(n) <= moduli.size(),
            "erdos_turan_bound: not enough moduli");
    require(N >= 1, "erdos_turan_bound: empty sample");
    Accum s;
    for (int k = 1; k <= n; ++k)
        s.add(moduli[static_cast<std::size_t>(k - 1)] / k);
    return 1.0 / n + s.value() / static_cast<double>(N);
}

double erdos_turan_bound(const std::vector<double>& values, int n) {
    const auto N = static_cast<std::int64_t>(values.size());
    require(N >= 1, "erdos_turan_bound: empty sample");
    if (n <= 0) n = static_cast<int>(std::ceil(std::cbrt(static_cast<double>(N))));
    return et_bound_from_moduli(exp_sum_moduli(values, n), n, N);
}

double erdos_turan_bound(const ModOneSample& sample, int n) {
    sample.validate();
    return erdos_turan_bound(sample.values, n);
}

double erdos_koksma_sum_bound(const ExpSumBoundInput& in) {
    require(in.rho > 0.0, "erdos_koksma_sum_bound: rho must be positive");
    require(in.k >= 1.0, "erdos_koksma_sum_bound: k must be at least 1");
    return (std::abs(in.Fpb - in.Fpa) + 2.0) * (3.0 + 1.0 / std::sqrt(in.rho));
}

DeviationReport interval_deviation(const ModOneSample& sample, const Interval& I) {
    sample.validate();
    require(I.hi >= I.lo, "deviation: interval must be ordered");
    require(I.lo >= 0.0 && I.hi <= 1.0, "deviation: interval must lie in [0, 1]");
    DeviationReport rep;
    rep.n = sample.size();
    require(rep.n > 0, "deviation: sample must be nonempty");
    for (double v : sample.values)
        if (I.contains_mod1(v)) ++rep.count;
    rep.deviation = std::abs(static_cast<double>(rep.count) / rep.n - I.length());
    return rep;
}

DecayFit decay_fit(const std::vector<double>& eps, const std::vector<double>& dev) {
    require(eps.size() == dev.size(), "decay_fit: length mismatch");
    DecayFit fit;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        require(eps[i] > 0.0, "decay_fit: eps must be positive");
        if (dev[i] > 0.0) {
            lx.push_back(std::log(eps[i]));
            ly.push_back(std::log(dev[i]));
        } else {
            ++fit.dropped;
        }
    }
    fit.used = static_cast<int>(lx.size());
    require(fit.used >= 2, "decay_fit: need at least two positive deviations");
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < fit.used; ++i) mx += lx[i], my += ly[i];
    mx /= fit.used;
    my /= fit.used;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < fit.used; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    require(sxx > 0.0, "decay_fit: eps values must not all coincide");
    fit.alpha = sxy / sxx;
    fit.C = std::exp(my - fit.alpha * mx);
    for (int i = 0; i < fit.used; ++i)
        fit.max_log_residual =
            std::max(fit.max_log_residual,
                     std::abs(ly[i] - (std::log(fit.C) + fit.alpha * lx[i])));
    return fit;
}

std::vector<ModOneSample> fiber_decompose(const ConvexSurface& s, double eps,
                                          const Box& qprime) {
    require(qprime.d >= 1, "fiber_decompose: qprime must have at least one axis");
    LatticeRange lat = LatticeRange::over(qprime, eps);
    std::vector<ModOneSample> fibers;
    if (lat.count() == 0) return fibers;

    const int m = qprime.d;
    // Odometer over the trailing k'' axes; the first axis runs inside a fiber.
    std::array<std::int64_t, kMaxDim> k{};
    for (int i = 1; i < m; ++i) k[i] = lat.kmin[i];
    while (true) {
        ModOneSample fiber;
        fiber.provenance.eps = eps;
        fiber.provenance.qprime = qprime;
        std::string tag = "fiber k''=(";
        for (int i = 1; i < m; ++i)
            tag += (i > 1 ? "," : "") + std::to_string(k[i]);
        fiber.provenance.generator = tag + ")";
        for (std::int64_t k1 = lat.kmin[0]; k1 <= lat.kmax[0]; ++k1) {
            Pt xp{};
            xp[0] = eps * static_cast<double>(k1);
            for (int i = 1; i < m; ++i) xp[i] = eps * static_cast<double>(k[i]);
            fiber.values.push_back(frac(s.g(xp) / eps));
        }
        fibers.push_back(std::move(fiber));
        if (m == 1) break;
        int axis = m - 1;
        while (axis >= 1 && ++k[axis] > lat.kmax[axis]) k[axis] = lat.kmin[axis], --axis;
        if (axis < 1) break;
    }
    return fibers;
}

}  // namespace sievehom
