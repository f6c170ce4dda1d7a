// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails. The experiment criteria share one cross-validation run
// on the default 24-case cohort (coarse grid) stored under --work.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "stationing/core/error.hpp"
#include "stationing/metrics/distance.hpp"
#include "stationing/metrics/overlap.hpp"
#include "stationing/metrics/zones.hpp"
#include "stationing/numerics/loss.hpp"
#include "stationing/numerics/ops.hpp"
#include "stationing/pipeline/experiment.hpp"
#include "stationing/segnet/segnet.hpp"

using namespace stationing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
    return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string f3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

// ---------------------------------------------------------------- A1
Outcome metric_oracles() {
    const auto start = Clock::now();
    const Spacing spacings[] = {{1, 1, 1}, {1, 1, 2}, {0.7, 0.9, 2.5}, {2, 1.5, 1}};
    CounterRng rng(derive_seed(17, "acceptance.a1", 0));
    int edt_bad = 0, surface_bad = 0, dice_bad = 0;
    double worst = 0;
    for (int t = 0; t < 200; ++t) {
        const Extents e{1 + static_cast<int>(rng.below(4 * t, 16)), 1 + static_cast<int>(rng.below(4 * t + 1, 16)),
                        1 + static_cast<int>(rng.below(4 * t + 2, 16))};
        const auto& s = spacings[rng.below(4 * t + 3, 4)];
        const auto a = oracle::random_mask(e, s, 10000 + 2 * t);
        const auto b = oracle::random_mask(e, s, 10001 + 2 * t);

        for (const auto* m : {&a, &b}) {
            const auto fast = metrics::distance_transform(*m);
            const auto slow = oracle::distance_field(*m);
            edt_bad += fast != slow;
        }
        const double hd = metrics::hausdorff(a, b), asd = metrics::asd(a, b);
        const double dh = std::abs(hd - oracle::hausdorff(a, b)), da = std::abs(asd - oracle::asd(a, b));
        worst = std::max({worst, dh, da});
        surface_bad += dh > 1e-6 || da > 1e-6;

        const auto [num, den] = oracle::dice_rational(a, b);
        dice_bad += metrics::dice(a, b) != static_cast<double>(num) / static_cast<double>(den);
    }
    const double secs = seconds_since(start);
    const bool ok = edt_bad == 0 && surface_bad == 0 && dice_bad == 0 && secs < 60;
    return {ok, "200 pairs: EDT mismatches " + std::to_string(edt_bad) + ", HD/ASD beyond 1e-6 " +
                    std::to_string(surface_bad) + " (worst " + std::to_string(worst) + " mm), Dice mismatches " +
                    std::to_string(dice_bad) + ", " + f3(secs) + " s"};
}

// ---------------------------------------------------------------- A2
Outcome gradient_checks() {
    using namespace numerics;
    using gradcheck::GraphD;
    const auto start = Clock::now();
    std::uint64_t seed = derive_seed(17, "acceptance.a2", 0);
    auto r = [&](Shape s, double lo = -1, double hi = 1) { return gradcheck::random_tensor(std::move(s), seed++, lo, hi); };
    std::vector<std::pair<std::string, gradcheck::Result>> results;
    auto run = [&](const std::string& name, const std::function<TensorD(GraphD&)>& loss, std::vector<TensorD> params,
                   double h = 1e-3) { results.emplace_back(name, gradcheck::check(loss, std::move(params), h)); };

    for (int rep = 0; rep < 3; ++rep) {
        {
            auto x = r({2, 3, 4, 3}), w = r({3, 2, 3, 3, 3}), b = r({3}), p = r({3, 3, 4, 3});
            run("conv3d s1", [&](GraphD& g) { return dot(g, conv3d(g, x, w, b, 1, 1), p); }, {x, w, b});
        }
        {
            auto x = r({2, 4, 4, 5}), w = r({2, 2, 3, 3, 3}), b = r({2}), p = r({2, 2, 2, 3});
            run("conv3d s2", [&](GraphD& g) { return dot(g, conv3d(g, x, w, b, 2, 1), p); }, {x, w, b});
        }
        {
            auto x = r({3, 2, 3, 2}), w = r({2, 3, 1, 1, 1}), b = r({2}), p = r({2, 2, 3, 2});
            run("conv3d 1x1", [&](GraphD& g) { return dot(g, conv3d(g, x, w, b, 1, 0), p); }, {x, w, b});
        }
        {
            auto x = r({2, 2, 1, 3}), p = r({2, 4, 2, 6});
            run("upsample", [&](GraphD& g) { return dot(g, upsample_nearest2(g, x), p); }, {x});
        }
        {
            auto a = r({1, 2, 2, 2}), b = r({2, 2, 2, 2}), p = r({3, 2, 2, 2});
            run("concat", [&](GraphD& g) { return dot(g, concat_channels(g, a, b), p); }, {a, b});
        }
        {
            auto x = r({3, 2, 2, 2}), s = r({1}), w = r({3}), p = r({3, 2, 2, 2});
            run("scale", [&](GraphD& g) { return dot(g, scale_channels(g, scale_channel(g, x, 1, s), w), p); }, {x, s, w});
        }
        {
            auto x = r({2, 3, 2, 2}), p = r({2, 3, 2, 2});
            for (auto& v : x.values())
                if (std::abs(v) < 0.01) v = 0.5;
            run("leaky_relu", [&](GraphD& g) { return dot(g, leaky_relu(g, x, 0.01), p); }, {x});
        }
        {
            auto x = r({3, 2, 3, 2}), ga = r({3}), be = r({3}), p = r({3, 2, 3, 2});
            run("instance_norm", [&](GraphD& g) { return dot(g, instance_norm(g, x, ga, be, 1e-5), p); }, {x, ga, be});
        }
        {
            auto x = r({3, 2, 2, 3}), p = r({3, 2, 2, 3});
            run("softmax c", [&](GraphD& g) { return dot(g, softmax(g, x, 0), p); }, {x});
            run("softmax z", [&](GraphD& g) { return dot(g, softmax(g, x, 1), p); }, {x});
            auto a = r({3});
            run("softmax [C]", [&](GraphD& g) { return dot(g, scale_channels(g, p, softmax(g, a, 0)), x); }, {a, p});
        }
        {
            auto logits = r({3, 2, 2, 2});
            CounterRng t(seed++);
            std::vector<std::uint8_t> target(8);
            for (std::size_t i = 0; i < 8; ++i) target[i] = static_cast<std::uint8_t>(t.below(i, 3));
            run("dice_ce", [&](GraphD& g) { return dice_ce_loss(g, softmax(g, logits, 0), target, 3); }, {logits});
        }
        {
            auto x = r({2, 2, 2, 2});
            run("sum", [&](GraphD& g) { return sum(g, leaky_relu(g, x, 0.2)); }, {x});
        }
    }

    // Full segnet loss: depth 2, width 2 on a 4^3 grid.
    segnet::NetConfig c;
    c.in_channels = 2;
    c.classes = 3;
    c.depth = 2;
    c.base_width = 2;
    c.extents = {4, 4, 4};
    c.seed = 11;
    std::vector<TensorD> params;
    for (const auto& p : segnet::build_model(c).params) params.push_back(p.cast<double>(true));
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i].rank() == 1) {
            auto d = gradcheck::random_tensor(params[i].shape(), 70 + i, -0.3, 0.3, false);
            for (std::size_t k = 0; k < d.values().size(); ++k) params[i].values()[k] += d.values()[k];
        }
    const auto x = gradcheck::random_tensor({2, 4, 4, 4}, 12, -1, 1, false);
    std::vector<std::uint8_t> target(64);
    for (std::size_t i = 0; i < target.size(); ++i) target[i] = static_cast<std::uint8_t>((i * 7 + i / 5) % 3);
    // A small step keeps the perturbation from crossing leaky-ReLU kinks.
    run("segnet loss", [&](GraphD& g) { return dice_ce_loss(g, segnet::forward(g, c, params, x), target, 3); }, params,
        1e-5);

    int failed = 0, coords = 0;
    std::string first;
    for (const auto& [name, res] : results) {
        coords += res.checked;
        if (!res.ok()) {
            ++failed;
            if (first.empty()) first = name + ": " + res.worst;
        }
    }
    const double secs = seconds_since(start);
    return {failed == 0 && secs < 120,
            std::to_string(results.size()) + " checks over " + std::to_string(coords) + " coordinates, " +
                std::to_string(failed) + " failed" + (first.empty() ? "" : " (" + first + ")") + ", " + f3(secs) + " s"};
}

// ---------------------------------------------------------------- A7
Outcome zone_harness() {
    const auto& names = metrics::standard_station_names();
    const auto zones = metrics::zone_map_for_legend(names);
    auto label = [&](const std::string& n) {
        return static_cast<int>(std::find(names.begin(), names.end(), n) - names.begin()) + 1;
    };
    LabelMap pred(Extents{8, 8, 4}, Spacing{1, 1, 1});
    std::vector<metrics::LnInstance> inst = {
        {label("S2L"), {1, 1, 1}, 1},  // predicted S4L: same superior zone
        {label("S7"), {4, 4, 2}, 1},   // predicted S7
        {label("S5"), {6, 6, 3}, 1},   // predicted background
    };
    pred.data[pred.extents.index(1, 1, 1)] = static_cast<std::uint8_t>(label("S4L"));
    pred.data[pred.extents.index(4, 4, 2)] = static_cast<std::uint8_t>(label("S7"));
    const double acc = metrics::zone_accuracy(inst, pred, zones);
    const double confusion = metrics::zone_accuracy({inst[0]}, pred, zones);
    const bool ok = acc == 2.0 / 3.0 && confusion == 1.0;
    return {ok, "3-instance scene " + f3(acc) + " (expect 2/3), S2L->S4L counted " + (confusion == 1.0 ? "correct" : "wrong")};
}

// ---------------------------------------------------------------- A8
Outcome determinism(const fs::path& work) {
    auto c = pipeline::default_experiment_config();
    c.phantom = phantom::coarse_phantom_config();
    c.cohort_size = 6;
    c.folds = 3;
    c.net.depth = 2;
    c.net.base_width = 4;
    for (auto* s : {&c.anchor_schedule, &c.nonanchor_schedule, &c.joint_schedule, &c.lns_schedule}) {
        s->epochs = 2;
        s->lr = 3e-3f;
    }
    c.search.total_epochs = 4;
    c.search.freeze_epochs = 1;
    c.search.net = c.lns_schedule;
    c.search.alpha_lr = 5e-2f;
    std::vector<std::string> csv;
    for (const auto& [dir, jobs] : std::vector<std::pair<std::string, int>>{{"a8_run1", 1}, {"a8_run2", 1}, {"a8_jobs3", 3}}) {
        pipeline::RunOptions o;
        o.output = work / dir;
        o.force = true;
        o.jobs = jobs;
        c.output = o.output.string();
        pipeline::run_cv(c, o);
        std::ifstream in(o.output / "report.csv", std::ios::binary);
        std::stringstream s;
        s << in.rdbuf();
        csv.push_back(s.str());
    }
    const bool ok = !csv[0].empty() && csv[0] == csv[1] && csv[0] == csv[2];
    return {ok, std::string("report.csv ") + (csv[0] == csv[1] ? "identical" : "differs") + " across two runs, " +
                    (csv[0] == csv[2] ? "identical" : "differs") + " with --jobs 3"};
}

// ---------------------------------------------------------------- experiment
pipeline::ExperimentConfig experiment_config(const fs::path& out) {
    auto c = pipeline::default_experiment_config();
    c.phantom = phantom::coarse_phantom_config();
    c.cohort_size = 24;
    c.folds = 4;
    c.net.depth = 3;
    c.net.base_width = 8;
    for (auto* s : {&c.anchor_schedule, &c.nonanchor_schedule, &c.joint_schedule, &c.lns_schedule}) {
        s->epochs = 30;
        s->lr = 3e-3f;
    }
    c.search.total_epochs = 60;
    c.search.freeze_epochs = 10;
    c.search.alpha_lr = 5e-2f;
    c.search.net = c.lns_schedule;
    c.output = out.string();
    c.seed = 17;
    return c;
}

double dice_of(const json& report, const std::string& arm) { return report.at("arms").at(arm).at("mean_dice").get<double>(); }

Outcome context_trend(const json& report, double minutes) {
    const auto gt = report.at("arms").at("organs_gt").at("per_fold_mean_dice").get<std::vector<double>>();
    const auto ct = report.at("arms").at("ct_only").at("per_fold_mean_dice").get<std::vector<double>>();
    int wins = 0;
    std::string gaps;
    for (std::size_t f = 0; f < gt.size(); ++f) {
        wins += gt[f] - ct[f] >= 0.05;
        gaps += (f ? " " : "") + f3(gt[f] - ct[f]);
    }
    return {wins >= 3, "organs_gt - ct_only per fold: " + gaps + " (" + std::to_string(wins) +
                           "/4 folds >= 0.05); experiment wall time " + f3(minutes) + " min"};
}

Outcome searched_trend(const json& report) {
    const double s = dice_of(report, "organs_searched"), ct = dice_of(report, "ct_only"),
                 pred = dice_of(report, "organs_pred");
    return {s >= ct + 0.03 && s >= pred - 0.01,
            "organs_searched " + f3(s) + ", ct_only " + f3(ct) + ", organs_pred " + f3(pred)};
}

Outcome baseline_ordering(const json& report) {
    const double s = dice_of(report, "organs_searched"), b = dice_of(report, "margin_baseline");
    return {s - b >= 0.05, "organs_searched " + f3(s) + " vs margin baseline " + f3(b)};
}

Outcome stratification(const json& report) {
    const auto& o = report.at("organs");
    const double a = o.at("cascade").at("anchor_mean_dice").get<double>();
    const double n = o.at("cascade").at("nonanchor_mean_dice").get<double>();
    const double j = o.at("joint").at("nonanchor_mean_dice").get<double>();
    const double z = o.at("zero_anchor_channels").at("nonanchor_mean_dice").get<double>();
    return {a > n && n >= j, "cascade anchor " + f3(a) + ", cascade non-anchor " + f3(n) + ", joint non-anchor " +
                                 f3(j) + " (zeroed anchor channels: " + f3(z) + ")"};
}

// A5: repeated searches on fold 0's training cases with independent seeds.
Outcome search_recovery(const pipeline::ExperimentConfig& config, const fs::path& out, int seeds) {
    const auto start = Clock::now();
    pipeline::RunOptions o;
    o.output = out;
    auto ws = pipeline::open_workspace(config, o, false);
    pipeline::AccessLog access;
    pipeline::FoldRunner runner(config, ws.cohort, ws.manifest, 0, out / "fold_0", access);
    const auto items = runner.items(pipeline::Arm::organs_pred, false);
    const auto& legend = ws.cohort.front().organ_legend;
    std::vector<std::string> names;
    std::string air;
    for (const auto& org : legend) {
        names.push_back(org.name);
        if (org.air) air = org.name;
    }
    const auto keys = ws.cohort.front().key_organs;
    const int classes = static_cast<int>(ws.cohort.front().station_legend.size()) + 1;

    int hits = 0;
    std::string detail;
    for (int s = 0; s < seeds; ++s) {
        pipeline::StageOptions so;
        so.net.depth = config.net.depth;
        so.net.base_width = config.net.base_width;
        so.net.seed = derive_seed(config.seed, "acceptance.a5.init", static_cast<std::uint64_t>(s));
        auto schedule = config.search;
        schedule.net.seed = derive_seed(config.seed, "acceptance.a5.shuffle", static_cast<std::uint64_t>(s));
        const auto r = autosearch::search(items, names, classes, so, schedule);
        std::map<std::string, int> rank;
        for (std::size_t k = 0; k < r.ranking.size(); ++k) rank[names[r.ranking[k]]] = static_cast<int>(k) + 1;
        bool keys_ok = true;
        for (const auto& k : keys) keys_ok = keys_ok && rank.at(k) <= 4;
        const bool air_ok = rank.at(air) > static_cast<int>(names.size()) - 3;
        hits += keys_ok && air_ok;
        detail += (s ? "; " : "") + std::string("seed ") + std::to_string(s) + ":";
        for (int k = 0; k < 4; ++k) detail += " " + names[r.ranking[k]];
        detail += " | " + air + " #" + std::to_string(rank.at(air));
    }
    const double secs = seconds_since(start);
    return {hits >= 4 && secs < 1200, std::to_string(hits) + "/" + std::to_string(seeds) +
                                          " seeds recover the key organs in the top 4 with " + air +
                                          " in the bottom 3, " + f3(secs / 60) + " min (" + detail + ")"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria A1-A9"};
    std::string work = "acceptance_work";
    bool fresh = false;
    std::vector<std::string> only;
    app.add_option("--work", work, "Working directory for the experiment runs");
    app.add_flag("--fresh", fresh, "Discard cached stages from an earlier run");
    app.add_option("--only", only, "Subset of criteria, e.g. A1,A7")->delimiter(',');
    CLI11_PARSE(app, argc, argv);
    const fs::path root = fs::absolute(work);
    if (fresh) fs::remove_all(root);
    fs::create_directories(root);

    auto wanted = [&](const std::string& id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
    std::map<std::string, Outcome> results;
    auto record = [&](const std::string& id, const std::function<Outcome()>& fn) {
        if (!wanted(id)) return;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        results[id] = o;
        std::cout << id << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
    };

    record("A1", metric_oracles);
    record("A2", gradient_checks);
    record("A7", zone_harness);
    record("A8", [&] { return determinism(root); });

    const bool need_cv = wanted("A3") || wanted("A4") || wanted("A6") || wanted("A9");
    const auto config = experiment_config(root / "cv");
    if (need_cv) {
        std::optional<json> report;
        double minutes = 0;
        std::string error;
        try {
            pipeline::RunOptions o;
            o.output = root / "cv";
            o.log = [](const std::string& m) { std::cerr << "  [cv] " << m << std::endl; };
            const auto start = Clock::now();
            if (fs::exists(o.output / "report.json")) {
                report = pipeline::rebuild_report(o.output);
            } else {
                report = pipeline::run_cv(config, o);
            }
            minutes = seconds_since(start) / 60;
        } catch (const std::exception& e) {
            error = e.what();
        }
        auto from_report = [&](const std::function<Outcome(const json&)>& fn) {
            return [&, fn] { return report ? fn(*report) : Outcome{false, "experiment failed: " + error}; };
        };
        record("A3", from_report([&](const json& r) { return context_trend(r, minutes); }));
        record("A4", from_report(searched_trend));
        record("A6", from_report(baseline_ordering));
        record("A9", from_report(stratification));
    }
    record("A5", [&] { return search_recovery(config, root / "cv", 5); });

    int failed = 0;
    for (const auto& [id, o] : results) failed += !o.pass;
    std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << std::endl;
    return failed ? 1 : 0;
}
