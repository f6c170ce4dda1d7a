#include "stationing/phantom/stations.hpp"

#include <array>
#include <map>

#include "stationing/core/error.hpp"
#include "stationing/core/rng.hpp"
#include "stationing/metrics/distance.hpp"

namespace stationing::phantom {

namespace {

int label_of(const std::vector<std::string>& legend, const std::string& name, const std::string& station) {
    for (std::size_t i = 0; i < legend.size(); ++i)
        if (legend[i] == name) return static_cast<int>(i) + 1;
    throw ConfigError("station " + station + " references unknown organ '" + name + "'");
}

struct Centroid {
    std::array<double, 3> mm{};
    bool present = false;
};

std::map<int, Centroid> centroids(const LabelMap& organs) {
    std::map<int, std::array<double, 4>> acc;
    const auto& e = organs.extents;
    const auto& s = organs.spacing;
    for (int k = 0; k < e.z; ++k)
        for (int j = 0; j < e.y; ++j)
            for (int i = 0; i < e.x; ++i) {
                const int l = organs.at(i, j, k);
                if (!l) continue;
                auto& a = acc[l];
                a[0] += i * s.x;
                a[1] += j * s.y;
                a[2] += k * s.z;
                a[3] += 1;
            }
    std::map<int, Centroid> out;
    for (const auto& [l, a] : acc) out[l] = {{a[0] / a[3], a[1] / a[3], a[2] / a[3]}, true};
    return out;
}

}  // namespace

StationMap lns_from_organs(const LabelMap& organs, const std::vector<std::string>& organ_legend,
                           const std::vector<StationRule>& rules) {
    STATIONING_REQUIRE(rules.size() <= 255, "too many station rules");
    StationMap out;
    out.labels = LabelMap(organs.extents, organs.spacing, 0);
    const auto& e = organs.extents;
    const auto& s = organs.spacing;
    const auto cents = centroids(organs);

    for (std::size_t r = 0; r < rules.size(); ++r) {
        const auto& rule = rules[r];
        const int source = label_of(organ_legend, rule.source, rule.station);
        struct Pred {
            double centroid;
            int axis;
            Side side;
        };
        std::vector<Pred> preds;
        std::string missing;
        for (const auto& p : rule.predicates) {
            const int l = label_of(organ_legend, p.organ, rule.station);
            STATIONING_REQUIRE(p.axis >= 0 && p.axis <= 2, "predicate axis out of range");
            const auto it = cents.find(l);
            if (it == cents.end()) missing = p.organ;
            else preds.push_back({it->second.mm[p.axis], p.axis, p.side});
        }
        if (!cents.count(source)) missing = rule.source;
        if (!missing.empty()) {
            out.warnings.push_back("station " + rule.station + " is empty: organ " + missing + " not present");
            continue;
        }

        metrics::BinaryMask src(e, s);
        for (std::size_t v = 0; v < organs.data.size(); ++v) src.bits[v] = organs.data[v] == source;
        const auto d2 = metrics::squared_distance_transform(src);
        const double lo2 = rule.inner * rule.inner, hi2 = rule.outer * rule.outer;

        std::size_t claimed = 0;
        for (int k = 0; k < e.z; ++k)
            for (int j = 0; j < e.y; ++j)
                for (int i = 0; i < e.x; ++i) {
                    const auto v = e.index(i, j, k);
                    if (organs.data[v] || out.labels.data[v]) continue;
                    if (d2[v] < lo2 || d2[v] >= hi2) continue;
                    const double pos[3] = {i * s.x, j * s.y, k * s.z};
                    bool ok = true;
                    for (const auto& p : preds) {
                        const double c = pos[p.axis];
                        ok = ok && (p.side == Side::below ? c < p.centroid : c > p.centroid);
                    }
                    if (!ok) continue;
                    out.labels.data[v] = static_cast<std::uint8_t>(r + 1);
                    ++claimed;
                }
        if (!claimed) out.warnings.push_back("station " + rule.station + " is empty");
    }
    return out;
}

StationMap margin_infer_baseline(const LabelMap& predicted_organs, const std::vector<std::string>& organ_legend,
                                 const std::vector<StationRule>& rules) {
    return lns_from_organs(predicted_organs, organ_legend, rules);
}

std::vector<StationRule> perturb_rules(const std::vector<StationRule>& rules, double fraction, std::uint64_t seed) {
    STATIONING_REQUIRE(fraction >= 0 && fraction < 1, "perturbation fraction must lie in [0, 1)");
    CounterRng rng(derive_seed(seed, "perturb_rules"));
    auto out = rules;
    for (std::size_t r = 0; r < out.size(); ++r) {
        const double f = rng.uniform(r, 1.0 - fraction, 1.0 + fraction);
        out[r].inner *= f;
        out[r].outer *= f;
    }
    return out;
}

}  // namespace stationing::phantom
