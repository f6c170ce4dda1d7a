#include "stationing/metrics/mask.hpp"

#include <algorithm>

namespace stationing::metrics {

BinaryMask BinaryMask::from_labels(const LabelMap& labels, std::uint8_t label) {
    BinaryMask m(labels.extents, labels.spacing);
    for (std::size_t i = 0; i < labels.data.size(); ++i) m.bits[i] = labels.data[i] == label ? 1 : 0;
    return m;
}

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

BinaryMask boundary(const BinaryMask& mask) {
    const auto& e = mask.extents;
    BinaryMask out(e, mask.spacing);
    static constexpr int offsets[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (int k = 0; k < e.z; ++k)
        for (int j = 0; j < e.y; ++j)
            for (int i = 0; i < e.x; ++i) {
                if (!mask.at(i, j, k)) continue;
                for (const auto& o : offsets) {
                    const int a = i + o[0], b = j + o[1], c = k + o[2];
                    if (!e.contains(a, b, c) || !mask.at(a, b, c)) {
                        out.set(i, j, k);
                        break;
                    }
                }
            }
    return out;
}

}  // namespace stationing::metrics
