#pragma once

#include <vector>

#include "stationing/metrics/mask.hpp"

namespace stationing::metrics {

// Exact squared Euclidean distance (mm^2) from every voxel centre to the
// nearest foreground voxel centre, honouring anisotropic spacing.
// Separable lower-envelope algorithm, one pass per axis (x, then y, then z).
// Throws EmptyMask when the mask has no foreground.
std::vector<double> squared_distance_transform(const BinaryMask& mask);

// sqrt of the above; foreground voxels map to 0.
std::vector<double> distance_transform(const BinaryMask& mask);

}  // namespace stationing::metrics
