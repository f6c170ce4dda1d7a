#include "stationing/metrics/overlap.hpp"

#include <algorithm>
#include <cmath>

#include "stationing/core/error.hpp"
#include "stationing/metrics/distance.hpp"

namespace stationing::metrics {
namespace {

void require_compatible(const BinaryMask& a, const BinaryMask& b) {
    STATIONING_REQUIRE(a.extents == b.extents, "mask extents differ");
    STATIONING_REQUIRE(a.bits.size() == a.extents.voxels() && b.bits.size() == b.extents.voxels(),
                       "mask storage does not match extents");
}

std::vector<double> directed(const BinaryMask& from_boundary, const BinaryMask& to_boundary) {
    const auto field = distance_transform(to_boundary);
    std::vector<double> out;
    for (std::size_t i = 0; i < from_boundary.bits.size(); ++i)
        if (from_boundary.bits[i]) out.push_back(field[i]);
    return out;
}

}  // namespace

double dice(const BinaryMask& a, const BinaryMask& b) {
    require_compatible(a, b);
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        const bool x = a.bits[i] != 0, y = b.bits[i] != 0;
        na += x;
        nb += y;
        both += x && y;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

SurfaceDistances surface_distances(const BinaryMask& a, const BinaryMask& b) {
    require_compatible(a, b);
    STATIONING_REQUIRE(a.spacing == b.spacing, "mask spacings differ");
    if (a.empty()) throw EmptyMask("first mask is empty");
    if (b.empty()) throw EmptyMask("second mask is empty");
    const auto ba = boundary(a);
    const auto bb = boundary(b);
    return {directed(ba, bb), directed(bb, ba)};
}

double hausdorff(const BinaryMask& a, const BinaryMask& b, const SurfaceOptions& options) {
    auto d = surface_distances(a, b);
    if (options.hd_percentile >= 100.0) {
        const double ab = *std::max_element(d.a_to_b.begin(), d.a_to_b.end());
        const double ba = *std::max_element(d.b_to_a.begin(), d.b_to_a.end());
        return std::max(ab, ba);
    }
    auto pct = [&](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        const auto idx = static_cast<std::size_t>(std::ceil(options.hd_percentile / 100.0 * v.size())) - 1;
        return v[std::min(idx, v.size() - 1)];
    };
    return std::max(pct(d.a_to_b), pct(d.b_to_a));
}

double asd(const BinaryMask& a, const BinaryMask& b) {
    const auto d = surface_distances(a, b);
    double total = 0.0;
    for (double v : d.a_to_b) total += v;
    for (double v : d.b_to_a) total += v;
    return total / static_cast<double>(d.a_to_b.size() + d.b_to_a.size());
}

}  // namespace stationing::metrics
