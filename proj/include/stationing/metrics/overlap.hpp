#pragma once

#include "stationing/metrics/mask.hpp"

namespace stationing::metrics {

// 2|A and B| / (|A| + |B|); both empty -> 1, exactly one empty -> 0.
double dice(const BinaryMask& a, const BinaryMask& b);

struct SurfaceOptions {
    // 100 = exact maximum. Other values take that percentile of the pooled
    // directed distances (HD95 and friends); not used by the reports.
    double hd_percentile = 100.0;
};

// Symmetric Hausdorff distance (mm) between 6-connected boundaries.
double hausdorff(const BinaryMask& a, const BinaryMask& b, const SurfaceOptions& options = {});

// Pooled symmetric mean of boundary-to-boundary distances (mm).
double asd(const BinaryMask& a, const BinaryMask& b);

struct SurfaceDistances {
    std::vector<double> a_to_b;
    std::vector<double> b_to_a;
};

// Distance from every boundary voxel of one mask to the other mask's boundary.
SurfaceDistances surface_distances(const BinaryMask& a, const BinaryMask& b);

}  // namespace stationing::metrics
