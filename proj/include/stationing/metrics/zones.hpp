#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stationing/core/volume.hpp"

namespace stationing::metrics {

// Station id -> zone id. Station ids are label values (1-based); label 0
// (background) never belongs to a zone.
struct ZoneMap {
    std::vector<std::string> zone_names;
    std::map<int, int> station_to_zone;

    int zone_of(int station) const;  // -1 when unmapped
};

// The four LN zones used for instance counting: supraclavicular (S1),
// superior (S2, S3, S4), aortic (S5, S6), inferior (S7, S8). Keyed by
// station name prefix, e.g. "S2" matches "S2L" and "S2 Right".
int zone_for_station_name(const std::string& station_name);
const std::vector<std::string>& standard_zone_names();

// Twelve-station legend: S1L S1R S2L S2R S3A S3P S4L S4R S5 S6 S7 S8.
const std::vector<std::string>& standard_station_names();

// Zone map for an arbitrary station legend (label = index + 1) using the
// station-name prefixes. Throws ConfigError for names outside S1..S8.
ZoneMap zone_map_for_legend(const std::vector<std::string>& station_legend);

// JSON: {"zones": ["supraclavicular", ...], "stations": {"<label>": <zone index>, ...}}
ZoneMap load_zone_map(const std::filesystem::path& path);
void save_zone_map(const ZoneMap& zones, const std::filesystem::path& path);

struct LnInstance {
    int station = 0;                 // true station label
    std::array<int, 3> voxel{};      // centroid voxel (x, y, z)
    int radius = 1;                  // voxels
};

// Fraction of instances whose centroid voxel carries a predicted station in
// the same zone as the true station. Background at the centroid is wrong.
// Throws ContractViolation("NoInstances") on an empty list.
double zone_accuracy(const std::vector<LnInstance>& instances, const LabelMap& predicted, const ZoneMap& zones);

}  // namespace stationing::metrics
