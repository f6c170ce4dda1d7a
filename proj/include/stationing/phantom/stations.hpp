#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stationing/core/volume.hpp"
#include "stationing/phantom/config.hpp"

namespace stationing::phantom {

struct StationMap {
    LabelMap labels;                    // 0 = none, rule index + 1 otherwise
    std::vector<std::string> warnings;  // one per empty station
};

// Margin-rule engine. `organ_legend[l - 1]` names organ label l. Rules are
// applied in order and a voxel claimed by an earlier rule is never
// reassigned. A rule whose source or predicate organ is missing from the map
// yields an empty station and a warning. Throws ConfigError for names not in
// the legend.
StationMap lns_from_organs(const LabelMap& organs, const std::vector<std::string>& organ_legend,
                           const std::vector<StationRule>& rules);

// The margin baseline: the same engine fed predicted organ labels.
StationMap margin_infer_baseline(const LabelMap& predicted_organs, const std::vector<std::string>& organ_legend,
                                 const std::vector<StationRule>& rules);

// Scales each rule's band by an independent factor drawn uniformly from
// [1 - fraction, 1 + fraction].
std::vector<StationRule> perturb_rules(const std::vector<StationRule>& rules, double fraction, std::uint64_t seed);

}  // namespace stationing::phantom
