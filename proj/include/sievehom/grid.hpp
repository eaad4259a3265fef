// Uniform Cartesian grids, nodal fields, and a flat binary field format.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "sievehom/util.hpp"

namespace sievehom {

// Node-centered uniform grid with a single spacing h shared by all axes.
// Node with multi-index i sits at origin + h * i; the last axis varies
// fastest in the flat ordering.
struct GridSpec {
    int d = 0;
    std::array<int, kMaxDim> n{};  // nodes per axis (>= 2)
    double h = 0.0;
    Pt origin{};

    // [-R, R]^d with `cells` cells per axis (cells even keeps a node at 0).
    static GridSpec centered_box(int d, double R, int cells);
    // Covers `box` with spacing close to h_target; the box extent is
    // enlarged by less than one cell per axis so that h is uniform.
    static GridSpec over_box(const Box& box, double h_target);

    std::size_t num_nodes() const;
    std::size_t num_cells() const;
    std::array<int, kMaxDim> cells() const;
    std::array<std::size_t, kMaxDim> node_strides() const;

    Pt node(const std::array<int, kMaxDim>& idx) const;
    std::size_t flat(const std::array<int, kMaxDim>& idx) const;
    std::array<int, kMaxDim> unflat(std::size_t flat_index) const;
    bool on_boundary(const std::array<int, kMaxDim>& idx) const;

    bool operator==(const GridSpec& o) const;
};

struct Field {
    GridSpec grid;
    std::vector<double> values;

    static Field zeros(const GridSpec& g) { return Field{g, std::vector<double>(g.num_nodes(), 0.0)}; }
};

// Multilinear interpolation at y; coordinates are clamped to the grid box.
double interpolate(const Field& f, const Pt& y);

// Flat binary format: "SHFD" magic, u32 version, i32 d, i64 dims[d],
// f64 h, f64 origin[d], then num_nodes f64 values (last axis fastest).
// All fields little-endian.
void write_field(const Field& f, const std::filesystem::path& path);
Field read_field(const std::filesystem::path& path);

}  // namespace sievehom
