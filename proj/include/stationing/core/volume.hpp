#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "stationing/core/error.hpp"

namespace stationing {

struct Extents {
    int x = 0;
    int y = 0;
    int z = 0;

    std::size_t voxels() const noexcept {
        return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) * static_cast<std::size_t>(z);
    }
    // x-fastest linear index.
    std::size_t index(int i, int j, int k) const noexcept {
        return (static_cast<std::size_t>(k) * y + static_cast<std::size_t>(j)) * x + static_cast<std::size_t>(i);
    }
    bool contains(int i, int j, int k) const noexcept {
        return i >= 0 && j >= 0 && k >= 0 && i < x && j < y && k < z;
    }
    friend bool operator==(const Extents&, const Extents&) = default;
};

// Millimetres per voxel along each axis.
struct Spacing {
    double x = 1.0;
    double y = 1.0;
    double z = 1.0;

    friend bool operator==(const Spacing&, const Spacing&) = default;
    Spacing scaled(double s) const noexcept { return {x * s, y * s, z * s}; }
};

template <typename T>
struct Grid {
    Extents extents;
    Spacing spacing;
    std::vector<T> data;

    Grid() = default;
    Grid(Extents e, Spacing s, T fill = T{}) : extents(e), spacing(s), data(e.voxels(), fill) {}

    T& at(int i, int j, int k) { return data[extents.index(i, j, k)]; }
    const T& at(int i, int j, int k) const { return data[extents.index(i, j, k)]; }
    std::size_t size() const noexcept { return data.size(); }

    friend bool operator==(const Grid&, const Grid&) = default;
};

// The image X.
using Volume = Grid<float>;
// Integer labels, 0 = background.
using LabelMap = Grid<std::uint8_t>;

inline std::array<double, 3> voxel_center_mm(const Spacing& s, int i, int j, int k) {
    return {i * s.x, j * s.y, k * s.z};
}

}  // namespace stationing
