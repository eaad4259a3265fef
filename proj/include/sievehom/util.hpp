#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sievehom {

// Spatial dimension is a runtime value but never exceeds kMaxDim; points are
// fixed-capacity arrays so geometry predicates stay allocation-free.
inline constexpr int kMaxDim = 4;

using Pt = std::array<double, kMaxDim>;

inline Pt make_pt(std::span<const double> v) {
    Pt p{};
    for (std::size_t i = 0; i < v.size() && i < kMaxDim; ++i) p[i] = v[i];
    return p;
}

inline double dot(const Pt& a, const Pt& b, int d) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Pt& a, int d) { return std::sqrt(dot(a, a, d)); }

inline Pt sub(const Pt& a, const Pt& b, int d) {
    Pt r{};
    for (int i = 0; i < d; ++i) r[i] = a[i] - b[i];
    return r;
}

inline Pt add(const Pt& a, const Pt& b, int d) {
    Pt r{};
    for (int i = 0; i < d; ++i) r[i] = a[i] + b[i];
    return r;
}

inline Pt scale(const Pt& a, double t, int d) {
    Pt r{};
    for (int i = 0; i < d; ++i) r[i] = a[i] * t;
    return r;
}

// Axis-aligned box; lattice membership tests treat it as half-open [lo, hi).
struct Box {
    int d = 0;
    Pt lo{};
    Pt hi{};

    bool contains_halfopen(const Pt& x) const {
        for (int i = 0; i < d; ++i)
            if (!(x[i] >= lo[i] && x[i] < hi[i])) return false;
        return true;
    }
    bool contains_closed(const Pt& x) const {
        for (int i = 0; i < d; ++i)
            if (!(x[i] >= lo[i] && x[i] <= hi[i])) return false;
        return true;
    }
    double extent(int i) const { return hi[i] - lo[i]; }
};

// Neumaier-compensated accumulator; used wherever long sums feed tolerances.
struct Accum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double v) {
        double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            comp += (sum - t) + v;
        else
            comp += (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

inline double frac(double x) {
    double f = x - std::floor(x);
    if (f >= 1.0) f = 0.0;  // guard against round-up at integer inputs
    return f;
}

struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SolverError : std::runtime_error {
    double residual = 0.0;
    explicit SolverError(const std::string& msg, double res = 0.0)
        : std::runtime_error(msg), residual(res) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

// Worker count for grid loops; 0 picks the hardware count.  Results are
// independent of the setting: work splits into fixed contiguous ranges and
// reductions combine partials in range order.
void set_num_threads(int n);
int num_threads();

namespace detail {
// fn(begin, end, chunk_index) over disjoint ranges covering [0, n).
void parallel_ranges(std::size_t n, const std::function<void(std::size_t, std::size_t, int)>& fn);
}  // namespace detail

template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    detail::parallel_ranges(n, [&](std::size_t b, std::size_t e, int) {
        for (std::size_t i = b; i < e; ++i) fn(i);
    });
}

// Sum of fn(i) over [0, n).  Partials are accumulated per fixed-size block
// and combined in block order, so the result does not depend on the thread
// count.
template <class Fn>
double parallel_sum(std::size_t n, Fn&& fn) {
    constexpr std::size_t kBlock = 1 << 16;
    const std::size_t nblocks = (n + kBlock - 1) / kBlock;
    if (nblocks <= 1) {
        Accum a;
        for (std::size_t i = 0; i < n; ++i) a.add(fn(i));
        return a.value();
    }
    std::vector<double> partial(nblocks);
    detail::parallel_ranges(nblocks, [&](std::size_t bb, std::size_t be, int) {
        for (std::size_t blk = bb; blk < be; ++blk) {
            Accum a;
            const std::size_t end = std::min(n, (blk + 1) * kBlock);
            for (std::size_t i = blk * kBlock; i < end; ++i) a.add(fn(i));
            partial[blk] = a.value();
        }
    });
    Accum total;
    for (double v : partial) total.add(v);
    return total.value();
}

}  // namespace sievehom
