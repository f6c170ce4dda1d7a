#include "stationing/phantom/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "stationing/core/error.hpp"
#include "stationing/core/rng.hpp"

namespace stationing::phantom {

namespace {

OrganSpec organ(std::string name, ShapeFamily shape, std::array<double, 3> center, std::array<double, 3> size,
                double intensity, bool anchor, bool air = false, double jitter = 2.0) {
    OrganSpec o;
    o.name = std::move(name);
    o.shape = shape;
    o.center = center;
    o.size = size;
    o.intensity = intensity;
    o.anchor = anchor;
    o.air = air;
    o.position_jitter = jitter;
    return o;
}

const char* shape_name(ShapeFamily s) {
    switch (s) {
        case ShapeFamily::ellipsoid: return "ellipsoid";
        case ShapeFamily::tube: return "tube";
        case ShapeFamily::box: return "box";
    }
    return "?";
}

ShapeFamily parse_shape(const std::string& s) {
    if (s == "ellipsoid") return ShapeFamily::ellipsoid;
    if (s == "tube") return ShapeFamily::tube;
    if (s == "box") return ShapeFamily::box;
    throw ConfigError("unknown shape family '" + s + "'");
}

int parse_axis(const nlohmann::json& j) {
    if (j.is_number_integer()) return j.get<int>();
    const auto s = j.get<std::string>();
    if (s == "x") return 0;
    if (s == "y") return 1;
    if (s == "z") return 2;
    throw ConfigError("unknown axis '" + s + "'");
}

}  // namespace

PhantomConfig default_phantom_config() {
    using S = ShapeFamily;
    PhantomConfig c;
    // The trachea is the only organ whose pose is loosely coupled to the
    // rest of the mediastinum; it stays clear of every station band. The
    // other decoys only graze the bands, so the key organs stay recoverable.
    c.organs = {
        organ("trachea", S::tube, {32, 19, 10}, {5, 5, 10}, -1.0, true, true, 6.0),
        organ("spine", S::tube, {32, 58, 32}, {7, 5, 32}, 1.2, true),
        organ("heart", S::ellipsoid, {34, 18, 55}, {14, 10, 10}, 0.9, true),
        organ("sternum", S::box, {32, 5, 32}, {6, 3, 24}, 1.0, true),
        organ("esophagus", S::tube, {32, 40, 32}, {5, 4, 32}, 0.3, false),
        organ("aortic_arch", S::ellipsoid, {38, 32, 34}, {10, 6, 5}, 0.3, false),
        organ("ascending_aorta", S::tube, {22, 28, 36}, {4, 4, 8}, 0.3, false),
        organ("pulmonary_vein", S::ellipsoid, {48, 40, 46}, {6, 5, 5}, 0.3, false),
        organ("azygos", S::tube, {46, 50, 40}, {4, 4, 24}, -0.3, false),
    };
    c.rules = {
        {"S4", "esophagus", 0.0, 8.0, {{"aortic_arch", 2, Side::below}}},
        {"S7", "esophagus", 0.0, 8.0, {{"aortic_arch", 2, Side::above}}},
        {"S5", "aortic_arch", 0.0, 8.0, {{"aortic_arch", 1, Side::below}}},
        {"S6", "ascending_aorta", 0.0, 8.0, {}},
    };
    return c;
}

PhantomConfig coarse_phantom_config() {
    auto c = default_phantom_config();
    c.extents = {32, 32, 16};
    c.spacing = {2.0, 2.0, 4.0};
    return c;
}

std::vector<std::string> organ_names(const PhantomConfig& config) {
    std::vector<std::string> names;
    for (const auto& o : config.organs) names.push_back(o.name);
    return names;
}

std::vector<std::string> station_names(const PhantomConfig& config) {
    std::vector<std::string> names;
    for (const auto& r : config.rules) names.push_back(r.station);
    return names;
}

int anchor_count(const PhantomConfig& config) {
    return static_cast<int>(std::count_if(config.organs.begin(), config.organs.end(),
                                          [](const OrganSpec& o) { return o.anchor; }));
}

std::vector<std::string> key_organs(const PhantomConfig& config) {
    std::set<std::string> used;
    for (const auto& r : config.rules) {
        used.insert(r.source);
        for (const auto& p : r.predicates) used.insert(p.organ);
    }
    std::vector<std::string> out;
    for (const auto& o : config.organs)
        if (used.count(o.name)) out.push_back(o.name);
    return out;
}

void validate(const PhantomConfig& c) {
    if (c.extents.x < 1 || c.extents.y < 1 || c.extents.z < 1) throw ConfigError("grid extents must be positive");
    if (!(c.spacing.x > 0 && c.spacing.y > 0 && c.spacing.z > 0)) throw ConfigError("spacing must be positive");
    if (!(c.noise_sigma >= 0)) throw ConfigError("noise_sigma must be non-negative");
    if (c.organs.empty()) throw ConfigError("no organs declared");
    if (c.organs.size() > 254) throw ConfigError("too many organs for 8-bit labels");
    if (c.rules.size() > 254) throw ConfigError("too many station rules for 8-bit labels");

    std::set<std::string> names;
    bool seen_non_anchor = false;
    for (const auto& o : c.organs) {
        if (o.name.empty()) throw ConfigError("organ with empty name");
        if (!names.insert(o.name).second) throw ConfigError("duplicate organ name '" + o.name + "'");
        if (o.anchor && seen_non_anchor)
            throw ConfigError("anchor organ '" + o.name + "' listed after a non-anchor organ");
        seen_non_anchor = seen_non_anchor || !o.anchor;
        for (double s : o.size)
            if (!(s > 0)) throw ConfigError("organ '" + o.name + "' has a non-positive size");
        if (o.position_jitter < 0 || o.size_jitter < 0 || o.size_jitter >= 1)
            throw ConfigError("organ '" + o.name + "' has an invalid jitter range");
        if (c.noise_sigma > 0) {
            const double contrast = std::abs(o.intensity - c.background) / c.noise_sigma;
            if (o.anchor && contrast < 4.0 - 1e-9)
                throw ConfigError("anchor organ '" + o.name + "' contrast " + std::to_string(contrast) +
                                  " sigma is below 4");
            if (!o.anchor && contrast > 1.5 + 1e-9)
                throw ConfigError("non-anchor organ '" + o.name + "' contrast " + std::to_string(contrast) +
                                  " sigma exceeds 1.5");
        }
    }
    if (anchor_count(c) == 0 || anchor_count(c) == static_cast<int>(c.organs.size()))
        throw ConfigError("need at least one anchor and one non-anchor organ");

    std::set<std::string> stations;
    for (const auto& r : c.rules) {
        if (r.station.empty()) throw ConfigError("station rule with empty name");
        if (!stations.insert(r.station).second) throw ConfigError("duplicate station '" + r.station + "'");
        if (!names.count(r.source))
            throw ConfigError("station " + r.station + " references unknown organ '" + r.source + "'");
        if (!(r.inner >= 0 && r.inner < r.outer)) throw ConfigError("station " + r.station + " has an invalid band");
        for (const auto& p : r.predicates) {
            if (!names.count(p.organ))
                throw ConfigError("station " + r.station + " references unknown organ '" + p.organ + "'");
            if (p.axis < 0 || p.axis > 2) throw ConfigError("station " + r.station + " has an invalid axis");
        }
    }
    const auto& ln = c.lymph_nodes;
    if (ln.min_count < 0 || ln.min_count > ln.max_count || ln.min_radius < 0 || ln.min_radius > ln.max_radius)
        throw ConfigError("invalid lymph node ranges");
}

void to_json(nlohmann::json& j, const PhantomConfig& c) {
    static const char* axes[] = {"x", "y", "z"};
    j = nlohmann::json::object();
    j["extents"] = {c.extents.x, c.extents.y, c.extents.z};
    j["spacing"] = {c.spacing.x, c.spacing.y, c.spacing.z};
    j["background"] = c.background;
    j["noise_sigma"] = c.noise_sigma;
    j["global_jitter"] = c.global_jitter;
    j["seed"] = c.seed;
    auto& organs = j["organs"] = nlohmann::json::array();
    for (const auto& o : c.organs) {
        organs.push_back({{"name", o.name},
                          {"shape", shape_name(o.shape)},
                          {"center", o.center},
                          {"size", o.size},
                          {"position_jitter", o.position_jitter},
                          {"size_jitter", o.size_jitter},
                          {"intensity", o.intensity},
                          {"anchor", o.anchor},
                          {"air", o.air}});
    }
    auto& rules = j["rules"] = nlohmann::json::array();
    for (const auto& r : c.rules) {
        auto preds = nlohmann::json::array();
        for (const auto& p : r.predicates)
            preds.push_back({{"organ", p.organ},
                             {"axis", axes[std::clamp(p.axis, 0, 2)]},
                             {"side", p.side == Side::below ? "below" : "above"}});
        rules.push_back(
            {{"station", r.station}, {"source", r.source}, {"band", {r.inner, r.outer}}, {"predicates", preds}});
    }
    j["lymph_nodes"] = {{"count", {c.lymph_nodes.min_count, c.lymph_nodes.max_count}},
                        {"radius", {c.lymph_nodes.min_radius, c.lymph_nodes.max_radius}},
                        {"intensity", c.lymph_nodes.intensity}};
}

void from_json(const nlohmann::json& j, PhantomConfig& c) {
    try {
        // Fields override a preset; without one the default anatomy is used.
        const auto preset = j.value("preset", std::string("default"));
        if (preset == "default") c = default_phantom_config();
        else if (preset == "coarse") c = coarse_phantom_config();
        else throw ConfigError("unknown phantom preset '" + preset + "'");
        if (j.contains("extents")) {
            const auto e = j.at("extents").get<std::array<int, 3>>();
            c.extents = {e[0], e[1], e[2]};
        }
        if (j.contains("spacing")) {
            const auto s = j.at("spacing").get<std::array<double, 3>>();
            c.spacing = {s[0], s[1], s[2]};
        }
        c.background = j.value("background", c.background);
        c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
        c.global_jitter = j.value("global_jitter", c.global_jitter);
        c.seed = j.value("seed", c.seed);
        if (j.contains("organs")) {
            c.organs.clear();
            for (const auto& o : j.at("organs")) {
                OrganSpec s;
                s.name = o.at("name").get<std::string>();
                s.shape = parse_shape(o.at("shape").get<std::string>());
                s.center = o.at("center").get<std::array<double, 3>>();
                s.size = o.at("size").get<std::array<double, 3>>();
                s.position_jitter = o.value("position_jitter", s.position_jitter);
                s.size_jitter = o.value("size_jitter", s.size_jitter);
                s.intensity = o.at("intensity").get<double>();
                s.anchor = o.value("anchor", false);
                s.air = o.value("air", false);
                c.organs.push_back(std::move(s));
            }
        }
        if (j.contains("rules")) {
            c.rules.clear();
            for (const auto& r : j.at("rules")) {
                StationRule s;
                s.station = r.at("station").get<std::string>();
                s.source = r.at("source").get<std::string>();
                const auto band = r.at("band").get<std::array<double, 2>>();
                s.inner = band[0];
                s.outer = band[1];
                for (const auto& p : r.value("predicates", nlohmann::json::array())) {
                    HalfSpace h;
                    h.organ = p.at("organ").get<std::string>();
                    h.axis = parse_axis(p.at("axis"));
                    const auto side = p.at("side").get<std::string>();
                    if (side != "below" && side != "above") throw ConfigError("unknown side '" + side + "'");
                    h.side = side == "below" ? Side::below : Side::above;
                    s.predicates.push_back(std::move(h));
                }
                c.rules.push_back(std::move(s));
            }
        }
        if (j.contains("lymph_nodes")) {
            const auto& ln = j.at("lymph_nodes");
            if (ln.contains("count")) {
                const auto n = ln.at("count").get<std::array<int, 2>>();
                c.lymph_nodes.min_count = n[0];
                c.lymph_nodes.max_count = n[1];
            }
            if (ln.contains("radius")) {
                const auto r = ln.at("radius").get<std::array<int, 2>>();
                c.lymph_nodes.min_radius = r[0];
                c.lymph_nodes.max_radius = r[1];
            }
            c.lymph_nodes.intensity = ln.value("intensity", c.lymph_nodes.intensity);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("phantom config: ") + e.what());
    }
}

std::uint64_t config_hash(const PhantomConfig& config) {
    nlohmann::json j = config;
    return fnv1a64(j.dump());
}

}  // namespace stationing::phantom
