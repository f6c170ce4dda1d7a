#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stationing/core/volume.hpp"
#include "stationing/metrics/zones.hpp"
#include "stationing/phantom/config.hpp"

namespace stationing::phantom {

struct OrganInfo {
    std::string name;
    bool anchor = false;
    bool air = false;
    friend bool operator==(const OrganInfo&, const OrganInfo&) = default;
};

struct CaseRecord {
    std::string id;
    Volume image;
    LabelMap organs;    // 0 = background, label l = organ_legend[l - 1]
    LabelMap stations;  // 0 = none, label s = station_legend[s - 1]
    std::vector<OrganInfo> organ_legend;
    std::vector<std::string> station_legend;
    std::vector<metrics::LnInstance> ln_instances;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::vector<std::string> key_organs;
    std::vector<std::string> warnings;
};

bool operator==(const CaseRecord& a, const CaseRecord& b);

// Pure function of (config, seed).
CaseRecord generate_case(const PhantomConfig& config, std::uint64_t seed, std::string id = "");

// Writes meta.json, image.raw, organs.raw, stations.raw.
void save_case(const CaseRecord& record, const std::filesystem::path& dir);

// Throws IoError naming the file for missing files, malformed meta.json,
// truncated or oversized payloads and checksum mismatches. When `expected`
// is given and its hash differs from the stored one, a warning is appended
// to `warnings`.
CaseRecord load_case(const std::filesystem::path& dir, const PhantomConfig* expected = nullptr,
                     std::vector<std::string>* warnings = nullptr);

// Station labels alone: a prediction, or the reference part of a case
// directory. load_station_map reads meta.json (id, extents, spacing,
// station_legend, optional ln_instances) and stations.raw, so it accepts
// full case directories as well.
struct StationFile {
    std::string id;
    LabelMap labels;
    std::vector<std::string> station_legend;
    std::vector<metrics::LnInstance> ln_instances;
};

void save_station_map(const StationFile& file, const std::filesystem::path& dir);
StationFile load_station_map(const std::filesystem::path& dir);

}  // namespace stationing::phantom
