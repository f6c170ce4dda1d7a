#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "stationing/autosearch/search.hpp"
#include "stationing/autosearch/weights.hpp"
#include "stationing/core/error.hpp"
#include "stationing/pipeline/cascade.hpp"
#include "stationing/pipeline/experiment.hpp"
#include "stationing/pipeline/folds.hpp"

using namespace stationing;
using namespace stationing::pipeline;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> ids_of(int n) {
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back("c" + std::to_string(i));
    return ids;
}

const std::vector<phantom::CaseRecord>& tiny_cohort() {
    static const auto cohort = generate_cohort(phantom::coarse_phantom_config(), 4, 5);
    return cohort;
}

StageOptions tiny_options(int epochs = 2) {
    StageOptions o;
    o.net.depth = 2;
    o.net.base_width = 2;
    o.net.seed = 11;
    o.schedule.epochs = epochs;
    o.schedule.lr = 3e-3f;
    o.schedule.seed = 12;
    return o;
}

std::vector<const phantom::CaseRecord*> pointers(const std::vector<phantom::CaseRecord>& cases) {
    std::vector<const phantom::CaseRecord*> out;
    for (const auto& c : cases) out.push_back(&c);
    return out;
}

// Ground-truth organ one-hot as stage-L organ channels.
std::vector<LnsItem> gt_items() {
    std::vector<LnsItem> items;
    for (const auto& c : tiny_cohort()) {
        LnsItem it;
        it.id = c.id;
        it.image = segnet::image_tensor(c.image);
        it.organs = one_hot(c.organs, 1, static_cast<int>(c.organ_legend.size()));
        it.target = c.stations.data;
        items.push_back(it);
    }
    return items;
}

bool same_params(const segnet::Model& a, const segnet::Model& b) {
    if (a.params.size() != b.params.size()) return false;
    for (std::size_t i = 0; i < a.params.size(); ++i) {
        const auto x = a.params[i].values();
        const auto y = b.params[i].values();
        if (!std::equal(x.begin(), x.end(), y.begin(), y.end())) return false;
    }
    return true;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

ExperimentConfig tiny_experiment(const fs::path& out) {
    auto c = default_experiment_config();
    c.phantom = phantom::coarse_phantom_config();
    c.cohort_size = 4;
    c.folds = 2;
    c.net.depth = 2;
    c.net.base_width = 2;
    for (auto* s : {&c.anchor_schedule, &c.nonanchor_schedule, &c.joint_schedule, &c.lns_schedule}) {
        s->epochs = 1;
        s->lr = 3e-3f;
    }
    c.search.total_epochs = 2;
    c.search.freeze_epochs = 1;
    c.search.net = c.lns_schedule;
    c.output = out.string();
    return c;
}

}  // namespace

TEST_CASE("folds partition the cohort and are reproducible") {
    const auto ids = ids_of(10);
    const auto m = make_folds(ids, 4, 7);
    REQUIRE(m.k == 4);
    std::multiset<std::string> all;
    std::size_t smallest = ids.size(), largest = 0;
    for (int f = 0; f < 4; ++f) {
        CHECK(std::is_sorted(m.test[f].begin(), m.test[f].end()));
        CHECK(m.train[f].size() + m.test[f].size() == ids.size());
        for (const auto& id : m.test[f]) {
            all.insert(id);
            CHECK(std::find(m.train[f].begin(), m.train[f].end(), id) == m.train[f].end());
        }
        smallest = std::min(smallest, m.test[f].size());
        largest = std::max(largest, m.test[f].size());
    }
    CHECK(all == std::multiset<std::string>(ids.begin(), ids.end()));
    CHECK(largest - smallest <= 1);
    check_manifest(m, ids);

    const auto again = make_folds(ids, 4, 7);
    CHECK(again.test == m.test);
    CHECK(make_folds(ids, 4, 8).test != m.test);

    CHECK_THROWS_AS(make_folds(ids, 1, 7), ConfigError);
    CHECK_THROWS_AS(make_folds(ids_of(3), 4, 7), ConfigError);
}

TEST_CASE("manifest checks catch leakage and bad partitions") {
    const auto ids = ids_of(6);
    auto m = make_folds(ids, 3, 1);
    auto leaky = m;
    leaky.train[0].push_back(leaky.test[0].front());
    CHECK_THROWS_AS(check_manifest(leaky, ids), LeakageError);

    auto missing = m;
    missing.test[1].pop_back();
    CHECK_THROWS_AS(check_manifest(missing, ids), ContractViolation);
}

TEST_CASE("access log names the stage that read a test case") {
    const auto ids = ids_of(6);
    const auto m = make_folds(ids, 3, 1);
    AccessLog log;
    for (const auto& id : m.train[0]) log.record(0, "anchor", id);
    log.check(m);
    CHECK(log.touched(0).size() == m.train[0].size());
    CHECK(log.stage_cases(0, "anchor") == m.train[0]);
    CHECK(log.stage_cases(0, "joint").empty());

    log.record(0, "nonanchor", m.test[0].front());
    try {
        log.check(m);
        FAIL("expected LeakageError");
    } catch (const LeakageError& e) {
        const std::string what = e.what();
        CHECK(what.find("nonanchor") != std::string::npos);
        CHECK(what.find(m.test[0].front()) != std::string::npos);
    }
}

TEST_CASE("fusion drops background channels and copies values unchanged") {
    auto a = numerics::Tensor::zeros({3, 2, 2, 2});  // background + 2 anchors
    auto b = numerics::Tensor::zeros({4, 2, 2, 2});  // background + 3 non-anchors
    for (std::size_t i = 0; i < a.values().size(); ++i) a.values()[i] = 0.1f * static_cast<float>(i) + 1e-7f;
    for (std::size_t i = 0; i < b.values().size(); ++i) b.values()[i] = -0.3f * static_cast<float>(i) + 3e-7f;
    const auto f = fuse_organ_predictions(a, b);
    REQUIRE(f.dim(0) == 5);
    const std::size_t plane = 8;
    for (std::size_t v = 0; v < plane; ++v) {
        for (int c = 0; c < 2; ++c) CHECK(f.values()[c * plane + v] == a.values()[(c + 1) * plane + v]);
        for (int c = 0; c < 3; ++c) CHECK(f.values()[(2 + c) * plane + v] == b.values()[(c + 1) * plane + v]);
    }
    auto bad = numerics::Tensor::zeros({4, 2, 2, 1});
    CHECK_THROWS(fuse_organ_predictions(a, bad));
}

TEST_CASE("organ layout and cascade shapes") {
    const auto& cohort = tiny_cohort();
    const auto layout = organ_layout(cohort.front().organ_legend);
    CHECK(layout.anchors == 4);
    CHECK(layout.nonanchors == 5);
    CHECK(layout.names.front() == "trachea");

    auto legend = cohort.front().organ_legend;
    std::swap(legend[0], legend[5]);
    CHECK_THROWS_AS(organ_layout(legend), ConfigError);

    const auto cases = pointers(cohort);
    const auto anchor = train_anchor(cases, tiny_options(1));
    CHECK(anchor.config.in_channels == 1);
    CHECK(anchor.config.classes == 1 + layout.anchors);
    const auto nonanchor = train_nonanchor(cases, anchor, tiny_options(1));
    CHECK(nonanchor.config.in_channels == 1 + layout.anchors);
    CHECK(nonanchor.config.classes == 1 + layout.nonanchors);

    const auto input = nonanchor_input(cohort.front(), anchor);
    CHECK(input.dim(0) == 1 + layout.anchors);
    const auto zeroed = nonanchor_input(cohort.front(), anchor, true);
    const std::size_t plane = cohort.front().image.data.size();
    for (std::size_t i = plane; i < zeroed.values().size(); ++i) REQUIRE(zeroed.values()[i] == 0.0f);

    const auto p = predict_organs(anchor, nonanchor, cohort.front());
    CHECK(p.fused.dim(0) == layout.total());
    CHECK(p.labels.data.size() == plane);
    for (auto l : p.labels.data) REQUIRE(l <= layout.total());

    // A model whose class count disagrees with the anchor legend.
    auto wrong = anchor;
    wrong.config.classes = 3;
    CHECK_THROWS_AS(train_nonanchor(cases, wrong, tiny_options(1)), ConfigError);
}

TEST_CASE("channel weights: softmax examples and arity checks") {
    const auto uniform = autosearch::channel_weights(std::vector<float>(4, 0.0f));
    for (float p : uniform) CHECK(p == doctest::Approx(0.25));
    const auto two = autosearch::channel_weights({0.0f, std::log(2.0f)});
    CHECK(two[0] == doctest::Approx(1.0 / 3.0));
    CHECK(two[1] == doctest::Approx(2.0 / 3.0));
    CHECK(autosearch::uniform_weights(3).phi() == autosearch::channel_weights(std::vector<float>(3, 0.0f)));

    auto organs = numerics::Tensor::zeros({2, 1, 1, 2});
    organs.values()[0] = 1;
    organs.values()[1] = 2;
    organs.values()[2] = 3;
    organs.values()[3] = 4;
    const auto scaled = autosearch::apply_weights(organs, {0.5f, 2.0f});
    CHECK(scaled.values()[0] == 0.5f);
    CHECK(scaled.values()[1] == 1.0f);
    CHECK(scaled.values()[2] == 6.0f);
    CHECK(scaled.values()[3] == 8.0f);
    CHECK_THROWS(autosearch::apply_weights(organs, {1.0f, 1.0f, 1.0f}));
    CHECK_THROWS_AS(autosearch::channel_weights(std::vector<float>{}), ContractViolation);

    auto items = gt_items();
    CHECK_THROWS_AS(lns_input(items[0], autosearch::uniform_weights(3)), ConfigError);
    CHECK_THROWS_AS(train_lns(items, 5, tiny_options(1), autosearch::uniform_weights(3)), ConfigError);
}

TEST_CASE("top-n selection: ranking order, ties and range") {
    const std::vector<float> phi = {0.1f, 0.3f, 0.2f, 0.3f, 0.1f};
    CHECK(autosearch::rank_channels(phi) == std::vector<int>{1, 3, 2, 0, 4});
    CHECK(autosearch::select_top_n(phi, 1) == std::vector<int>{1});
    CHECK(autosearch::select_top_n(phi, 3) == std::vector<int>{1, 2, 3});
    CHECK(autosearch::select_top_n(phi, 4) == std::vector<int>{0, 1, 2, 3});
    CHECK(autosearch::select_top_n(phi, 5) == std::vector<int>{0, 1, 2, 3, 4});
    CHECK_THROWS_AS(autosearch::select_top_n(phi, 0), ContractViolation);
    CHECK_THROWS_AS(autosearch::select_top_n(phi, 6), ContractViolation);
}

TEST_CASE("uniform in-graph weighting matches a prescaled input stream") {
    const auto items = gt_items();
    const int C = static_cast<int>(items.front().organs.dim(0));
    const auto w = autosearch::uniform_weights(C);
    const auto weighted = train_lns(items, 5, tiny_options(), w);

    auto prescaled = items;
    for (auto& it : prescaled) it.organs = autosearch::apply_weights(it.organs, w.phi());
    const auto plain = train_lns(prescaled, 5, tiny_options());
    CHECK(same_params(weighted, plain));
    CHECK(weighted.loss_log == plain.loss_log);
}

TEST_CASE("search with the whole run frozen reproduces a uniform-weight retrain") {
    const auto items = gt_items();
    const auto names = organ_layout(tiny_cohort().front().organ_legend).names;
    autosearch::SearchSchedule s;
    s.total_epochs = 2;
    s.freeze_epochs = 2;
    s.alpha_lr = 1e-2f;
    s.net = tiny_options().schedule;
    const auto r = autosearch::search(items, names, 5, tiny_options(), s);
    const auto plain = train_lns(items, 5, tiny_options(), autosearch::uniform_weights(static_cast<int>(names.size())));
    CHECK(same_params(r.model, plain));
    for (float a : r.alpha) CHECK(a == 0.0f);
    CHECK(r.alpha_history.size() == 2);
}

TEST_CASE("alpha history: one entry per epoch, constant during the freeze") {
    const auto items = gt_items();
    const auto names = organ_layout(tiny_cohort().front().organ_legend).names;
    autosearch::SearchSchedule s;
    s.total_epochs = 3;
    s.freeze_epochs = 1;
    s.alpha_lr = 5e-2f;
    s.net = tiny_options().schedule;
    std::vector<std::string> seen;
    auto o = tiny_options();
    o.on_access = [&](const std::string& id) { seen.push_back(id); };
    const auto r = autosearch::search(items, names, 5, o, s);
    REQUIRE(r.alpha_history.size() == 3);
    for (float a : r.alpha_history[0]) CHECK(a == 0.0f);
    CHECK(r.alpha_history[2] != r.alpha_history[0]);
    CHECK(r.alpha == r.alpha_history.back());
    CHECK(r.ranking == autosearch::rank_channels(r.phi));
    double sum = 0;
    for (float p : r.phi) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(seen.size() == 3 * items.size());

    s.freeze_epochs = 4;
    CHECK_THROWS_AS(autosearch::search(items, names, 5, o, s), ConfigError);
    auto bare = items;
    bare[1].organs = numerics::Tensor();
    s.freeze_epochs = 1;
    CHECK_THROWS_AS(autosearch::search(bare, names, 5, o, s), ContractViolation);
}

TEST_CASE("experiment config round-trips and rejects bad values") {
    auto c = default_experiment_config();
    c.arms = {Arm::ct_only, Arm::organs_searched};
    c.top_n = 4;
    c.hard_organ_channels = true;
    c.search.freeze_epochs = 7;
    const auto back = experiment_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK(effective_top_n(default_experiment_config()) == 3);

    CHECK_THROWS_AS(parse_arm("organs_magic"), ConfigError);
    auto j = to_json(c);
    j["top_n"] = 10;
    CHECK_THROWS_AS(experiment_from_json(j), ConfigError);
    j = to_json(c);
    j["cohort_size"] = 0;
    CHECK_THROWS_AS(experiment_from_json(j), ConfigError);
    j = to_json(c);
    j["organ_channels"] = "fuzzy";
    CHECK_THROWS_AS(experiment_from_json(j), ConfigError);
    j = to_json(c);
    j["arms"] = {"ct_only", "ct_only"};
    CHECK_THROWS_AS(experiment_from_json(j), ConfigError);
    CHECK_THROWS_AS(generate_cohort(c.phantom, 0, 1), ConfigError);
}

TEST_CASE("cohort save and load") {
    const auto dir = fs::temp_directory_path() / "stationing_test_cohort";
    fs::remove_all(dir);
    save_cohort(tiny_cohort(), dir);
    CHECK(fs::exists(dir / "manifest.json"));
    const auto back = load_cohort(dir);
    REQUIRE(back.size() == tiny_cohort().size());
    for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == tiny_cohort()[i]);
    CHECK(back[2].id == "case_002");
    fs::remove_all(dir);
}

TEST_CASE("cross-validation run: outputs, leakage, resume and determinism") {
    const auto root = fs::temp_directory_path() / "stationing_test_cv";
    fs::remove_all(root);
    const auto config = tiny_experiment(root / "a");
    RunOptions o;
    o.output = root / "a";
    const auto report = run_cv(config, o);
    for (const char* f : {"config.json", "manifest.json", "report.json", "report.csv", "per_case.csv",
                          "fold_metrics.csv", "fold_0/result.json", "fold_1/search/search.json",
                          "fold_0/anchor.ckpt", "fold_0/lns_organs_searched_top3.ckpt"})
        CHECK_MESSAGE(fs::exists(root / "a" / f), f);
    CHECK(report.at("arms").contains("margin_baseline"));
    CHECK(fs::exists(root / "a" / "fold_0" / "pred" / "organs_gt"));
    CHECK(report.at("arms").at("ct_only").at("per_fold_mean_dice").size() == 2);

    // No training stage of a fold saw that fold's test cases.
    const auto manifest = nlohmann::json::parse(slurp(root / "a" / "manifest.json"));
    for (int f = 0; f < 2; ++f) {
        const auto result = nlohmann::json::parse(slurp(root / "a" / ("fold_" + std::to_string(f)) / "result.json"));
        for (const auto& id : result.at("test")) {
            const auto& touched = result.at("touched");
            CHECK(std::find(touched.begin(), touched.end(), id) == touched.end());
        }
    }

    CHECK_THROWS_AS(run_cv(config, o), ConfigError);

    // Resume after a finished fold: drop the report and one fold result.
    const auto csv = slurp(root / "a" / "report.csv");
    rebuild_report(root / "a");
    CHECK(slurp(root / "a" / "report.csv") == csv);
    fs::remove(root / "a" / "report.json");
    fs::remove(root / "a" / "fold_1" / "result.json");
    run_cv(config, o);
    CHECK(slurp(root / "a" / "report.csv") == csv);

    // A different config in a half-finished directory is refused.
    fs::remove(root / "a" / "report.json");
    auto other = config;
    other.seed = 99;
    CHECK_THROWS_AS(run_cv(other, o), ConfigError);

    auto b = o;
    b.output = root / "b";
    b.jobs = 2;
    run_cv(config, b);
    CHECK(slurp(root / "b" / "report.csv") == csv);
    fs::remove_all(root);
}
