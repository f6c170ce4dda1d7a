#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stationing/core/volume.hpp"

namespace stationing::phantom {

enum class ShapeFamily { ellipsoid, tube, box };

// Geometry is in millimetres in the physical frame whose origin is the
// centre of voxel (0, 0, 0). For an ellipsoid `size` holds the three radii,
// for a tube (axis along z) the two cross-section radii and the half length,
// for a box the three half extents.
struct OrganSpec {
    std::string name;
    ShapeFamily shape = ShapeFamily::ellipsoid;
    std::array<double, 3> center{};
    std::array<double, 3> size{};
    double position_jitter = 2.0;  // mm, uniform per axis
    double size_jitter = 0.1;      // relative, one factor per organ
    double intensity = 0.0;        // absolute mean image value inside the organ
    bool anchor = false;
    bool air = false;
};

enum class Side { below, above };

// "strictly on the given side of `organ`'s centroid along `axis`".
struct HalfSpace {
    std::string organ;
    int axis = 0;  // 0 = x, 1 = y, 2 = z
    Side side = Side::below;
};

// Voxels whose distance to `source` lies in [inner, outer) mm and which
// satisfy every predicate. Organ voxels never belong to a station.
struct StationRule {
    std::string station;
    std::string source;
    double inner = 0.0;
    double outer = 8.0;
    std::vector<HalfSpace> predicates;
};

struct LnSpec {
    int min_count = 2;
    int max_count = 5;
    int min_radius = 1;  // voxels
    int max_radius = 2;
    double intensity = 1.0;
};

struct PhantomConfig {
    Extents extents{64, 64, 32};
    Spacing spacing{1.0, 1.0, 2.0};
    double background = 0.0;
    double noise_sigma = 0.2;
    double global_jitter = 4.0;  // mm, shared by every organ of a case
    std::vector<OrganSpec> organs;
    std::vector<StationRule> rules;
    LnSpec lymph_nodes;
    std::uint64_t seed = 17;
};

// Nine organs (four anchors, five non-anchors) and four stations generated
// from three key organs, on a 64x64x32 grid at 1x1x2 mm.
PhantomConfig default_phantom_config();

// Same anatomy in the same 64 mm field of view, sampled at 2x2x4 mm
// (32x32x16 voxels).
PhantomConfig coarse_phantom_config();

// Throws ConfigError: duplicate or empty names, anchors not listed first,
// contrast outside the anchor/non-anchor bounds, rules naming unknown
// organs, bad bands or axes, degenerate grid or lymph-node ranges.
void validate(const PhantomConfig& config);

// Organs used by at least one rule (as source or predicate), legend order.
std::vector<std::string> key_organs(const PhantomConfig& config);

int anchor_count(const PhantomConfig& config);
std::vector<std::string> organ_names(const PhantomConfig& config);
std::vector<std::string> station_names(const PhantomConfig& config);

// Hash of the canonical JSON dump (FNV-1a 64).
std::uint64_t config_hash(const PhantomConfig& config);

void to_json(nlohmann::json& j, const PhantomConfig& c);
void from_json(const nlohmann::json& j, PhantomConfig& c);

}  // namespace stationing::phantom
