#include "stationing/metrics/distance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stationing/core/error.hpp"

namespace stationing::metrics {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1-D lower envelope of parabolas s2*(q-p)^2 + f[p] over the finite samples
// of f. Writes the minimum into d; all-infinite lines stay infinite.
void envelope_1d(const double* f, double* d, int n, double s2, std::vector<int>& v, std::vector<double>& z) {
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -kInf;
            z[1] = kInf;
            continue;
        }
        double s = 0.0;
        while (true) {
            const int p = v[k];
            s = ((f[q] + s2 * q * q) - (f[p] + s2 * p * p)) / (2.0 * s2 * (q - p));
            // Near-ties are kept: rounding can make a barely dominated
            // parabola the smallest value at an integer position.
            if (s > z[k] - 1e-9 * std::max(1.0, std::abs(z[k]))) break;
            --k;  // z[0] = -inf guarantees termination at k = 0
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    if (k < 0) {
        for (int q = 0; q < n; ++q) d[q] = kInf;
        return;
    }
    auto value = [&](int q, int p) {
        const double diff = q - p;
        return (diff * diff) * s2 + f[p];
    };
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (j < k && z[j + 1] < q) ++j;
        // The rounded minimum may sit on a neighbouring parabola at a breakpoint.
        double best = value(q, v[j]);
        if (j > 0) best = std::min(best, value(q, v[j - 1]));
        if (j < k) best = std::min(best, value(q, v[j + 1]));
        d[q] = best;
    }
}

}  // namespace

std::vector<double> squared_distance_transform(const BinaryMask& mask) {
    const auto& e = mask.extents;
    if (mask.empty()) throw EmptyMask("distance transform of an empty mask");
    std::vector<double> grid(e.voxels());
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = mask.bits[i] ? 0.0 : kInf;

    const int longest = std::max({e.x, e.y, e.z});
    std::vector<double> f(longest), d(longest), z(longest + 1);
    std::vector<int> v(longest);

    auto pass = [&](int n, double spacing, auto&& index_of, int lines_a, int lines_b) {
        const double s2 = spacing * spacing;
        for (int b = 0; b < lines_b; ++b)
            for (int a = 0; a < lines_a; ++a) {
                for (int q = 0; q < n; ++q) f[q] = grid[index_of(q, a, b)];
                envelope_1d(f.data(), d.data(), n, s2, v, z);
                for (int q = 0; q < n; ++q) grid[index_of(q, a, b)] = d[q];
            }
    };
    pass(e.x, mask.spacing.x, [&](int q, int a, int b) { return e.index(q, a, b); }, e.y, e.z);
    pass(e.y, mask.spacing.y, [&](int q, int a, int b) { return e.index(a, q, b); }, e.x, e.z);
    pass(e.z, mask.spacing.z, [&](int q, int a, int b) { return e.index(a, b, q); }, e.x, e.y);
    return grid;
}

std::vector<double> distance_transform(const BinaryMask& mask) {
    auto d = squared_distance_transform(mask);
    for (auto& v : d) v = std::sqrt(v);
    return d;
}

}  // namespace stationing::metrics
