#include "stationing/metrics/zones.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "stationing/core/error.hpp"

namespace stationing::metrics {

int ZoneMap::zone_of(int station) const {
    auto it = station_to_zone.find(station);
    return it == station_to_zone.end() ? -1 : it->second;
}

const std::vector<std::string>& standard_zone_names() {
    static const std::vector<std::string> names = {"supraclavicular", "superior", "aortic", "inferior"};
    return names;
}

const std::vector<std::string>& standard_station_names() {
    static const std::vector<std::string> names = {"S1L", "S1R", "S2L", "S2R", "S3A", "S3P",
                                                   "S4L", "S4R", "S5",  "S6",  "S7",  "S8"};
    return names;
}

int zone_for_station_name(const std::string& station_name) {
    if (station_name.size() < 2 || station_name[0] != 'S') return -1;
    switch (station_name[1]) {
        case '1': return 0;
        case '2': case '3': case '4': return 1;
        case '5': case '6': return 2;
        case '7': case '8': return 3;
        default: return -1;
    }
}

ZoneMap zone_map_for_legend(const std::vector<std::string>& station_legend) {
    ZoneMap zones;
    zones.zone_names = standard_zone_names();
    for (std::size_t i = 0; i < station_legend.size(); ++i) {
        const int z = zone_for_station_name(station_legend[i]);
        if (z < 0) throw ConfigError("station '" + station_legend[i] + "' does not map to an LN zone");
        zones.station_to_zone[static_cast<int>(i) + 1] = z;
    }
    return zones;
}

ZoneMap load_zone_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open zone file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
        ZoneMap zones;
        zones.zone_names = j.at("zones").get<std::vector<std::string>>();
        for (const auto& [key, value] : j.at("stations").items()) {
            const int zone = value.get<int>();
            if (zone < 0 || zone >= static_cast<int>(zones.zone_names.size()))
                throw ConfigError("zone index out of range for station " + key);
            zones.station_to_zone[std::stoi(key)] = zone;
        }
        return zones;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": malformed zone file: " + e.what());
    }
}

void save_zone_map(const ZoneMap& zones, const std::filesystem::path& path) {
    nlohmann::json j;
    j["zones"] = zones.zone_names;
    j["stations"] = nlohmann::json::object();
    for (const auto& [station, zone] : zones.station_to_zone) j["stations"][std::to_string(station)] = zone;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write zone file " + path.string());
    out << j.dump(2) << '\n';
}

double zone_accuracy(const std::vector<LnInstance>& instances, const LabelMap& predicted, const ZoneMap& zones) {
    if (instances.empty()) throw ContractViolation("NoInstances");
    std::size_t correct = 0;
    for (const auto& inst : instances) {
        const auto& v = inst.voxel;
        STATIONING_REQUIRE(predicted.extents.contains(v[0], v[1], v[2]), "instance centroid outside the grid");
        const int label = predicted.at(v[0], v[1], v[2]);
        if (label == 0) continue;
        const int truth = zones.zone_of(inst.station);
        if (truth >= 0 && zones.zone_of(label) == truth) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(instances.size());
}

}  // namespace stationing::metrics
