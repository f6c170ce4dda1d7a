#pragma once

#include <cstdint>
#include <vector>

#include "stationing/core/volume.hpp"

namespace stationing::metrics {

// One bit (stored as a byte) per voxel plus the physical spacing.
struct BinaryMask {
    Extents extents;
    Spacing spacing;
    std::vector<std::uint8_t> bits;

    BinaryMask() = default;
    BinaryMask(Extents e, Spacing s) : extents(e), spacing(s), bits(e.voxels(), 0) {}

    static BinaryMask from_labels(const LabelMap& labels, std::uint8_t label);

    bool at(int i, int j, int k) const { return bits[extents.index(i, j, k)] != 0; }
    void set(int i, int j, int k, bool v = true) { bits[extents.index(i, j, k)] = v ? 1 : 0; }
    std::size_t count() const;
    bool empty() const { return count() == 0; }
};

// Foreground voxels with at least one 6-neighbour outside the set; voxels
// on the grid border count as boundary.
BinaryMask boundary(const BinaryMask& mask);

}  // namespace stationing::metrics
