#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "stationing/core/error.hpp"
#include "stationing/core/rng.hpp"
#include "stationing/phantom/phantom.hpp"
#include "stationing/phantom/stations.hpp"

using namespace stationing;
using namespace stationing::phantom;
namespace fs = std::filesystem;

namespace {

// Direct evaluation of the rule semantics: all-pairs distances, centroids
// from a plain scan, earlier rules win.
LabelMap brute_force_stations(const LabelMap& organs, const std::vector<std::string>& legend,
                              const std::vector<StationRule>& rules) {
    const auto& e = organs.extents;
    const auto& s = organs.spacing;
    LabelMap out(e, s, 0);
    auto label = [&](const std::string& n) {
        return static_cast<int>(std::find(legend.begin(), legend.end(), n) - legend.begin()) + 1;
    };
    for (std::size_t r = 0; r < rules.size(); ++r) {
        const auto& rule = rules[r];
        metrics::BinaryMask src(e, s);
        for (std::size_t v = 0; v < organs.data.size(); ++v) src.bits[v] = organs.data[v] == label(rule.source);
        if (src.empty()) continue;
        const auto dist = oracle::distance_field(src);
        std::vector<double> cent;
        bool missing = false;
        for (const auto& p : rule.predicates) {
            double sum = 0;
            long n = 0;
            for (int k = 0; k < e.z; ++k)
                for (int j = 0; j < e.y; ++j)
                    for (int i = 0; i < e.x; ++i)
                        if (organs.at(i, j, k) == label(p.organ)) {
                            sum += (p.axis == 0 ? i * s.x : p.axis == 1 ? j * s.y : k * s.z);
                            ++n;
                        }
            missing = missing || n == 0;
            cent.push_back(n ? sum / n : 0);
        }
        if (missing) continue;
        for (int k = 0; k < e.z; ++k)
            for (int j = 0; j < e.y; ++j)
                for (int i = 0; i < e.x; ++i) {
                    const auto v = e.index(i, j, k);
                    if (organs.data[v] || out.data[v]) continue;
                    if (!(dist[v] >= rule.inner && dist[v] < rule.outer)) continue;
                    bool ok = true;
                    for (std::size_t q = 0; q < rule.predicates.size(); ++q) {
                        const auto& p = rule.predicates[q];
                        const double c = p.axis == 0 ? i * s.x : p.axis == 1 ? j * s.y : k * s.z;
                        ok = ok && (p.side == Side::below ? c < cent[q] : c > cent[q]);
                    }
                    if (ok) out.data[v] = static_cast<std::uint8_t>(r + 1);
                }
    }
    return out;
}

LabelMap cube_organ(Extents e, Spacing s, int x0, int y0, int z0, int n, std::uint8_t label = 1) {
    LabelMap m(e, s, 0);
    for (int k = z0; k < z0 + n; ++k)
        for (int j = y0; j < y0 + n; ++j)
            for (int i = x0; i < x0 + n; ++i)
                if (e.contains(i, j, k)) m.at(i, j, k) = label;
    return m;
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("stationing_test_phantom_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("default config is valid and respects the contrast bounds") {
    for (const auto& c : {default_phantom_config(), coarse_phantom_config()}) {
        CHECK_NOTHROW(validate(c));
        CHECK(c.organs.size() == 9);
        CHECK(anchor_count(c) == 4);
        for (const auto& o : c.organs) {
            const double contrast = std::abs(o.intensity - c.background) / c.noise_sigma;
            if (o.anchor) CHECK(contrast >= 4.0);
            else CHECK(contrast <= 1.5 + 1e-12);
        }
        CHECK(key_organs(c) == std::vector<std::string>{"esophagus", "aortic_arch", "ascending_aorta"});
        int air = 0;
        for (const auto& o : c.organs) air += o.air;
        CHECK(air == 1);
    }
    CHECK(default_phantom_config().extents == Extents{64, 64, 32});
    CHECK(default_phantom_config().spacing == Spacing{1, 1, 2});
}

TEST_CASE("validation rejects broken configs") {
    auto c = default_phantom_config();
    SUBCASE("unknown organ") {
        c.rules[0].source = "liver";
        CHECK_THROWS_AS(validate(c), ConfigError);
    }
    SUBCASE("duplicate name") {
        c.organs[1].name = c.organs[0].name;
        CHECK_THROWS_AS(validate(c), ConfigError);
    }
    SUBCASE("dim anchor") {
        c.organs[1].intensity = 0.5;
        CHECK_THROWS_AS(validate(c), ConfigError);
    }
    SUBCASE("bright non-anchor") {
        c.organs[5].intensity = 0.8;
        CHECK_THROWS_AS(validate(c), ConfigError);
    }
    SUBCASE("inverted band") {
        c.rules[1].inner = 9;
        CHECK_THROWS_AS(validate(c), ConfigError);
    }
    SUBCASE("anchors must come first") {
        std::swap(c.organs[3], c.organs[4]);
        CHECK_THROWS_AS(validate(c), ConfigError);
    }
}

TEST_CASE("config json round trip and hash") {
    const auto c = coarse_phantom_config();
    nlohmann::json j = c;
    const auto back = j.get<PhantomConfig>();
    CHECK(nlohmann::json(back) == j);
    CHECK(config_hash(back) == config_hash(c));
    auto d = c;
    d.noise_sigma = 0.1;
    CHECK(config_hash(d) != config_hash(c));
    const auto preset = nlohmann::json{{"preset", "coarse"}, {"noise_sigma", 0.1}}.get<PhantomConfig>();
    CHECK(config_hash(preset) == config_hash(d));
    CHECK_THROWS_AS((nlohmann::json{{"preset", "nope"}}.get<PhantomConfig>()), ConfigError);
}

TEST_CASE("generate_case is a pure function of config and seed") {
    const auto c = coarse_phantom_config();
    const auto a = generate_case(c, 99), b = generate_case(c, 99);
    CHECK(a == b);
    const auto other = generate_case(c, 100);
    CHECK_FALSE(other.image.data == a.image.data);
}

TEST_CASE("noise-free image equals organ intensities") {
    auto c = coarse_phantom_config();
    c.noise_sigma = 0;
    const auto r = generate_case(c, 5);
    for (std::size_t v = 0; v < r.organs.data.size(); ++v)
        if (r.organs.data[v]) REQUIRE(r.image.data[v] == static_cast<float>(c.organs[r.organs.data[v] - 1].intensity));
}

TEST_CASE("default cohort: stations avoid organs and lymph nodes sit in their stations") {
    const auto c = default_phantom_config();
    for (std::uint64_t i = 0; i < 3; ++i) {
        const auto r = generate_case(c, case_seed(17, i));
        std::size_t overlap = 0, stations = 0;
        for (std::size_t v = 0; v < r.organs.data.size(); ++v) {
            overlap += r.organs.data[v] && r.stations.data[v];
            stations += r.stations.data[v] != 0;
        }
        CHECK(overlap == 0);
        CHECK(stations > 0);
        CHECK(r.warnings.empty());
        CHECK(r.ln_instances.size() >= 2);
        CHECK(r.ln_instances.size() <= 5);
        for (const auto& n : r.ln_instances) {
            CHECK(r.stations.at(n.voxel[0], n.voxel[1], n.voxel[2]) == n.station);
            CHECK(n.radius >= 1);
            CHECK(n.radius <= 2);
        }
        // Empirical contrast over the generated image.
        double bg = 0;
        long nbg = 0;
        for (std::size_t v = 0; v < r.organs.data.size(); ++v)
            if (!r.organs.data[v] && !r.stations.data[v]) bg += r.image.data[v], ++nbg;
        bg /= nbg;
        for (std::size_t o = 0; o < c.organs.size(); ++o) {
            double sum = 0;
            long n = 0;
            for (std::size_t v = 0; v < r.organs.data.size(); ++v)
                if (r.organs.data[v] == o + 1) sum += r.image.data[v], ++n;
            // Allow four standard errors of sampling noise on the organ mean.
            const double contrast = std::abs(sum / n - bg) / c.noise_sigma;
            const double slack = 4.0 / std::sqrt(double(n));
            if (c.organs[o].anchor) CHECK(contrast >= 4.0 - slack);
            else CHECK(contrast <= 1.5 + slack);
        }
    }
}

TEST_CASE("single cube organ gives a hollow shell matching brute force") {
    const Extents e{16, 16, 12};
    const Spacing s{1, 1, 2};
    const auto organs = cube_organ(e, s, 4, 4, 2, 8);
    const std::vector<StationRule> rules = {{"S6", "cube", 2.0, 5.0, {}}};
    const auto got = lns_from_organs(organs, {"cube"}, rules);
    CHECK(got.labels.data == brute_force_stations(organs, {"cube"}, rules).data);
    CHECK(got.warnings.empty());
    // Voxels adjacent to the cube are closer than 2 mm along x and excluded.
    CHECK(got.labels.at(3, 6, 4) == 0);
    CHECK(got.labels.at(1, 6, 4) == 1);
}

TEST_CASE("out-of-grid band yields an empty station and a warning") {
    const auto c = default_phantom_config();
    const auto base = generate_case(c, 3);
    auto rules = c.rules;
    rules[3].inner = 100;
    rules[3].outer = 200;
    const auto got = lns_from_organs(base.organs, organ_names(c), rules);
    for (auto v : got.labels.data) CHECK_FALSE(v == 4);
    REQUIRE(got.warnings.size() == 1);
    CHECK(got.warnings[0].find("S6") != std::string::npos);
}

TEST_CASE("band plus predicate equals the intersection of single-constraint outputs") {
    const auto c = coarse_phantom_config();
    const auto r = generate_case(c, 11);
    const auto names = organ_names(c);
    const StationRule both = {"S4", "esophagus", 0, 8, {{"aortic_arch", 2, Side::below}}};
    const StationRule band = {"S4", "esophagus", 0, 8, {}};
    const StationRule half = {"S4", "esophagus", 0, 1e9, {{"aortic_arch", 2, Side::below}}};
    const auto a = lns_from_organs(r.organs, names, {both}).labels;
    const auto b = lns_from_organs(r.organs, names, {band}).labels;
    const auto h = lns_from_organs(r.organs, names, {half}).labels;
    std::size_t n = 0;
    for (std::size_t v = 0; v < a.data.size(); ++v) {
        CHECK(a.data[v] == (b.data[v] && h.data[v] ? 1 : 0));
        n += a.data[v];
    }
    CHECK(n > 0);
}

TEST_CASE("randomized rules on small grids match the brute-force engine") {
    for (std::uint64_t t = 0; t < 12; ++t) {
        CounterRng rng(4242 + t);
        std::uint64_t c = 0;
        const Extents e{8 + int(rng.below(c++, 9)), 8 + int(rng.below(c++, 9)), 4 + int(rng.below(c++, 13))};
        const Spacing s{1.0, rng.uniform(c++) < 0.5 ? 1.0 : 1.5, rng.uniform(c++) < 0.5 ? 2.0 : 2.5};
        LabelMap organs(e, s, 0);
        for (std::uint8_t l = 1; l <= 3; ++l) {
            const int n = 2 + int(rng.below(c++, 4));
            const auto cube = cube_organ(e, s, rng.below(c++, e.x), rng.below(c++, e.y), rng.below(c++, e.z), n, l);
            for (std::size_t v = 0; v < cube.data.size(); ++v)
                if (cube.data[v]) organs.data[v] = l;
        }
        const std::vector<std::string> legend = {"a", "b", "c"};
        std::vector<StationRule> rules;
        for (int r = 0; r < 3; ++r) {
            StationRule rule;
            rule.station = "S" + std::to_string(r + 4);
            rule.source = legend[rng.below(c++, 3)];
            rule.inner = rng.uniform(c++, 0.0, 3.0);
            rule.outer = rule.inner + rng.uniform(c++, 0.5, 6.0);
            if (rng.uniform(c++) < 0.6)
                rule.predicates.push_back({legend[rng.below(c++, 3)], int(rng.below(c++, 3)),
                                           rng.uniform(c++) < 0.5 ? Side::below : Side::above});
            rules.push_back(rule);
        }
        const auto got = lns_from_organs(organs, legend, rules);
        CHECK_MESSAGE(got.labels.data == brute_force_stations(organs, legend, rules).data, "trial " << t);
    }
}

TEST_CASE("unknown organ in a rule is a configuration error") {
    const LabelMap organs({4, 4, 4}, {}, 0);
    CHECK_THROWS_AS(lns_from_organs(organs, {"a"}, {{"S4", "b", 0, 1, {}}}), ConfigError);
}

TEST_CASE("margin baseline") {
    const auto c = coarse_phantom_config();
    const auto r = generate_case(c, 21);
    const auto names = organ_names(c);
    SUBCASE("ground-truth organs reproduce the ground-truth stations") {
        CHECK(margin_infer_baseline(r.organs, names, c.rules).labels == r.stations);
    }
    SUBCASE("dilated organs match brute force") {
        auto dilated = r.organs;
        const auto& e = r.organs.extents;
        for (int k = 0; k < e.z; ++k)
            for (int j = 0; j < e.y; ++j)
                for (int i = 0; i < e.x; ++i) {
                    if (r.organs.at(i, j, k)) continue;
                    const int n[6][3] = {{i + 1, j, k}, {i - 1, j, k}, {i, j + 1, k},
                                         {i, j - 1, k}, {i, j, k + 1}, {i, j, k - 1}};
                    for (const auto& q : n)
                        if (e.contains(q[0], q[1], q[2]) && r.organs.at(q[0], q[1], q[2])) {
                            dilated.at(i, j, k) = r.organs.at(q[0], q[1], q[2]);
                            break;
                        }
                }
        const auto got = margin_infer_baseline(dilated, names, c.rules);
        CHECK(got.labels.data == brute_force_stations(dilated, names, c.rules).data);
        CHECK_FALSE(got.labels == r.stations);
    }
    SUBCASE("empty organ map gives empty stations") {
        const auto got = margin_infer_baseline(LabelMap(r.organs.extents, r.organs.spacing, 0), names, c.rules);
        for (auto v : got.labels.data) REQUIRE(v == 0);
        CHECK(got.warnings.size() == c.rules.size());
    }
}

TEST_CASE("perturb_rules scales bands within the stated fraction") {
    const auto rules = default_phantom_config().rules;
    const auto p = perturb_rules(rules, 0.25, 8);
    CHECK(p.size() == rules.size());
    bool changed = false;
    for (std::size_t r = 0; r < rules.size(); ++r) {
        CHECK(p[r].outer >= 0.75 * rules[r].outer);
        CHECK(p[r].outer <= 1.25 * rules[r].outer);
        changed = changed || p[r].outer != rules[r].outer;
    }
    CHECK(changed);
    CHECK(perturb_rules(rules, 0.25, 8)[0].outer == p[0].outer);
    CHECK(perturb_rules(rules, 0.0, 8)[2].outer == rules[2].outer);
}

TEST_CASE("save and load") {
    const auto c = coarse_phantom_config();
    const auto r = generate_case(c, 31, "case_031");
    const auto dir = scratch("roundtrip");
    save_case(r, dir);
    SUBCASE("round trip is lossless") {
        std::vector<std::string> warnings;
        CHECK(load_case(dir, &c, &warnings) == r);
        CHECK(warnings.empty());
    }
    SUBCASE("truncated payload") {
        fs::resize_file(dir / "organs.raw", fs::file_size(dir / "organs.raw") - 1);
        CHECK_THROWS_WITH_AS(load_case(dir), doctest::Contains("truncated payload"), IoError);
        CHECK_THROWS_WITH_AS(load_case(dir), doctest::Contains("organs.raw"), IoError);
    }
    SUBCASE("corrupted payload") {
        std::fstream f(dir / "image.raw", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(10);
        f.put('\x7f');
        f.close();
        CHECK_THROWS_WITH_AS(load_case(dir), doctest::Contains("image.raw"), IoError);
    }
    SUBCASE("config hash mismatch warns") {
        auto other = c;
        other.noise_sigma = 0.1;
        std::vector<std::string> warnings;
        CHECK(load_case(dir, &other, &warnings) == r);
        REQUIRE(warnings.size() == 1);
        CHECK(warnings[0].find("config hash") != std::string::npos);
    }
    SUBCASE("malformed header") {
        std::ofstream(dir / "meta.json") << "{ not json";
        CHECK_THROWS_WITH_AS(load_case(dir), doctest::Contains("meta.json"), IoError);
    }
    fs::remove_all(dir);
}
