#include "sievehom/grid.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace sievehom {

GridSpec GridSpec::centered_box(int d, double R, int cells) {
    require(d >= 1 && d <= kMaxDim, "grid: d out of range");
    require(R > 0.0, "grid: R must be positive");
    require(cells >= 1, "grid: need at least one cell per axis");
    GridSpec g;
    g.d = d;
    g.h = 2.0 * R / cells;
    for (int i = 0; i < d; ++i) {
        g.n[i] = cells + 1;
        g.origin[i] = -R;
    }
    return g;
}

GridSpec GridSpec::over_box(const Box& box, double h_target) {
    require(box.d >= 1 && box.d <= kMaxDim, "grid: d out of range");
    require(h_target > 0.0, "grid: h must be positive");
    GridSpec g;
    g.d = box.d;
    g.h = h_target;
    for (int i = 0; i < box.d; ++i) {
        double ext = box.hi[i] - box.lo[i];
        require(ext > 0.0, "grid: box must have positive extent");
        int cells = static_cast<int>(std::ceil(ext / h_target - 1e-9));
        g.n[i] = std::max(cells, 1) + 1;
        g.origin[i] = box.lo[i];
    }
    return g;
}

std::size_t GridSpec::num_nodes() const {
    std::size_t m = 1;
    for (int i = 0; i < d; ++i) m *= static_cast<std::size_t>(n[i]);
    return m;
}

std::size_t GridSpec::num_cells() const {
    std::size_t m = 1;
    for (int i = 0; i < d; ++i) m *= static_cast<std::size_t>(n[i] - 1);
    return m;
}

std::array<int, kMaxDim> GridSpec::cells() const {
    std::array<int, kMaxDim> c{};
    for (int i = 0; i < d; ++i) c[i] = n[i] - 1;
    return c;
}

std::array<std::size_t, kMaxDim> GridSpec::node_strides() const {
    std::array<std::size_t, kMaxDim> s{};
    std::size_t acc = 1;
    for (int i = d - 1; i >= 0; --i) {
        s[i] = acc;
        acc *= static_cast<std::size_t>(n[i]);
    }
    return s;
}

Pt GridSpec::node(const std::array<int, kMaxDim>& idx) const {
    Pt y{};
    for (int i = 0; i < d; ++i) y[i] = origin[i] + h * idx[i];
    return y;
}

std::size_t GridSpec::flat(const std::array<int, kMaxDim>& idx) const {
    std::size_t f = 0;
    for (int i = 0; i < d; ++i) f = f * static_cast<std::size_t>(n[i]) + static_cast<std::size_t>(idx[i]);
    return f;
}

std::array<int, kMaxDim> GridSpec::unflat(std::size_t flat_index) const {
    std::array<int, kMaxDim> idx{};
    for (int i = d - 1; i >= 0; --i) {
        idx[i] = static_cast<int>(flat_index % static_cast<std::size_t>(n[i]));
        flat_index /= static_cast<std::size_t>(n[i]);
    }
    return idx;
}

bool GridSpec::on_boundary(const std::array<int, kMaxDim>& idx) const {
    for (int i = 0; i < d; ++i)
        if (idx[i] == 0 || idx[i] == n[i] - 1) return true;
    return false;
}

bool GridSpec::operator==(const GridSpec& o) const {
    if (d != o.d || h != o.h) return false;
    for (int i = 0; i < d; ++i)
        if (n[i] != o.n[i] || origin[i] != o.origin[i]) return false;
    return true;
}

double interpolate(const Field& f, const Pt& y) {
    const GridSpec& g = f.grid;
    require(f.values.size() == g.num_nodes(), "interpolate: size mismatch");
    std::array<std::size_t, kMaxDim> i0{};
    std::array<double, kMaxDim> frac{};
    for (int i = 0; i < g.d; ++i) {
        double s = (y[i] - g.origin[i]) / g.h;
        if (s < 0.0) s = 0.0;
        const double smax = static_cast<double>(g.n[i] - 1);
        if (s > smax) s = smax;
        double base = std::floor(s);
        if (base > smax - 1.0) base = smax - 1.0;  // keep a full cell in range
        if (base < 0.0) base = 0.0;
        i0[i] = static_cast<std::size_t>(base);
        frac[i] = s - base;
    }
    const auto strides = g.node_strides();
    double acc = 0.0;
    for (unsigned corner = 0; corner < (1u << g.d); ++corner) {
        double wgt = 1.0;
        std::size_t at = 0;
        for (int i = 0; i < g.d; ++i) {
            const bool hi = corner & (1u << i);
            wgt *= hi ? frac[i] : 1.0 - frac[i];
            at += (i0[i] + (hi ? 1 : 0)) * strides[i];
        }
        acc += wgt * f.values[at];
    }
    return acc;
}

namespace {

constexpr char kMagic[4] = {'S', 'H', 'F', 'D'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    require(static_cast<bool>(in), "field read: truncated file");
    return v;
}

}  // namespace

void write_field(const Field& f, const std::filesystem::path& path) {
    require(f.values.size() == f.grid.num_nodes(), "field write: size mismatch");
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), "field write: cannot open " + path.string());
    out.write(kMagic, 4);
    put(out, kVersion);
    put(out, static_cast<std::int32_t>(f.grid.d));
    for (int i = 0; i < f.grid.d; ++i) put(out, static_cast<std::int64_t>(f.grid.n[i]));
    put(out, f.grid.h);
    for (int i = 0; i < f.grid.d; ++i) put(out, f.grid.origin[i]);
    out.write(reinterpret_cast<const char*>(f.values.data()),
              static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    require(static_cast<bool>(out), "field write: short write to " + path.string());
}

Field read_field(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "field read: cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    require(static_cast<bool>(in) && std::memcmp(magic, kMagic, 4) == 0,
            "field read: bad magic in " + path.string());
    require(get<std::uint32_t>(in) == kVersion, "field read: unsupported version");
    Field f;
    f.grid.d = get<std::int32_t>(in);
    require(f.grid.d >= 1 && f.grid.d <= kMaxDim, "field read: bad dimension");
    for (int i = 0; i < f.grid.d; ++i) {
        auto ni = get<std::int64_t>(in);
        require(ni >= 2 && ni <= (1 << 24), "field read: bad axis size");
        f.grid.n[i] = static_cast<int>(ni);
    }
    f.grid.h = get<double>(in);
    require(f.grid.h > 0.0, "field read: bad spacing");
    for (int i = 0; i < f.grid.d; ++i) f.grid.origin[i] = get<double>(in);
    f.values.resize(f.grid.num_nodes());
    in.read(reinterpret_cast<char*>(f.values.data()),
            static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    require(static_cast<bool>(in), "field read: truncated payload");
    return f;
}

}  // namespace sievehom
