#include "stationing/pipeline/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "stationing/core/error.hpp"
#include "stationing/core/rng.hpp"
#include "stationing/metrics/zones.hpp"
#include "stationing/phantom/stations.hpp"

namespace stationing::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw IoError(path.filename().string() + ": malformed JSON: " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("short write to " + path.string());
}

json schedule_json(const segnet::TrainSchedule& s) {
    return {{"epochs", s.epochs}, {"lr", s.lr}, {"decay_at", s.decay_at}, {"decay", s.decay}};
}

segnet::TrainSchedule schedule_from(const json& j, segnet::TrainSchedule s) {
    s.epochs = j.value("epochs", s.epochs);
    s.lr = j.value("lr", s.lr);
    s.decay_at = j.value("decay_at", s.decay_at);
    s.decay = j.value("decay", s.decay);
    return s;
}

std::string fmt(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string case_dir_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "case_%03d", i);
    return buf;
}

}  // namespace

const char* arm_name(Arm arm) {
    switch (arm) {
        case Arm::ct_only: return "ct_only";
        case Arm::organs_gt: return "organs_gt";
        case Arm::organs_pred: return "organs_pred";
        case Arm::organs_searched: return "organs_searched";
    }
    return "?";
}

Arm parse_arm(const std::string& name) {
    for (Arm a : all_arms())
        if (name == arm_name(a)) return a;
    throw ConfigError("unknown arm '" + name + "' (expected ct_only, organs_gt, organs_pred or organs_searched)");
}

std::vector<Arm> all_arms() { return {Arm::ct_only, Arm::organs_gt, Arm::organs_pred, Arm::organs_searched}; }

ExperimentConfig default_experiment_config() {
    ExperimentConfig c;
    c.anchor_schedule.lr = c.nonanchor_schedule.lr = c.joint_schedule.lr = c.lns_schedule.lr = 1e-3f;
    c.search.net = c.lns_schedule;
    c.search.alpha_lr = 10 * c.lns_schedule.lr;
    return c;
}

int effective_top_n(const ExperimentConfig& c) {
    return c.top_n > 0 ? c.top_n : static_cast<int>(phantom::key_organs(c.phantom).size());
}

void validate(const ExperimentConfig& c) {
    phantom::validate(c.phantom);
    if (c.cohort_size < 1) throw ConfigError("empty cohort");
    if (c.folds < 2) throw ConfigError("fold count must be at least 2");
    if (c.cohort_size < c.folds) throw ConfigError("cohort smaller than the fold count");
    if (c.arms.empty() && !c.margin_baseline) throw ConfigError("no arms selected");
    std::set<Arm> seen;
    for (Arm a : c.arms)
        if (!seen.insert(a).second) throw ConfigError(std::string("arm listed twice: ") + arm_name(a));
    autosearch::validate(c.search);
    const int organs = static_cast<int>(c.phantom.organs.size());
    const int n = effective_top_n(c);
    if (n < 1 || n > organs) throw ConfigError("top_n " + std::to_string(n) + " exceeds the organ count");
    for (int s : c.sweep)
        if (s < 1 || s > organs) throw ConfigError("sweep value " + std::to_string(s) + " exceeds the organ count");
    if (c.baseline_perturbation < 0 || c.baseline_perturbation >= 1)
        throw ConfigError("baseline perturbation must lie in [0, 1)");
    for (const auto* s : {&c.anchor_schedule, &c.nonanchor_schedule, &c.joint_schedule, &c.lns_schedule})
        if (s->epochs < 0 || !(s->lr > 0)) throw ConfigError("schedules need non-negative epochs and a positive lr");
    auto net = c.net;
    net.extents = c.phantom.extents;
    net.classes = 2;
    net.in_channels = 1;
    segnet::validate(net);
}

json to_json(const ExperimentConfig& c) {
    std::vector<std::string> arms;
    for (Arm a : c.arms) arms.push_back(arm_name(a));
    auto search = schedule_json(c.search.net);
    search.erase("epochs");
    search["total_epochs"] = c.search.total_epochs;
    search["freeze_epochs"] = c.search.freeze_epochs;
    search["alpha_lr"] = c.search.alpha_lr;
    return {{"phantom", json(c.phantom)},
            {"cohort_size", c.cohort_size},
            {"folds", c.folds},
            {"arms", arms},
            {"margin_baseline", c.margin_baseline},
            {"joint_model", c.joint_model},
            {"anchor_ablation", c.anchor_ablation},
            {"net", {{"depth", c.net.depth}, {"base_width", c.net.base_width}}},
            {"schedules",
             {{"anchor", schedule_json(c.anchor_schedule)},
              {"nonanchor", schedule_json(c.nonanchor_schedule)},
              {"joint", schedule_json(c.joint_schedule)},
              {"lns", schedule_json(c.lns_schedule)},
              {"search", search}}},
            {"organ_channels", c.hard_organ_channels ? "hard" : "soft"},
            {"weighted_retrain", c.weighted_retrain},
            {"top_n", c.top_n},
            {"sweep", c.sweep},
            {"baseline_perturbation", c.baseline_perturbation},
            {"cohort", c.cohort},
            {"output", c.output},
            {"seed", c.seed}};
}

ExperimentConfig experiment_from_json(const json& j) {
    auto c = default_experiment_config();
    try {
        if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
        if (j.contains("phantom")) c.phantom = j.at("phantom").get<phantom::PhantomConfig>();
        c.cohort_size = j.value("cohort_size", c.cohort_size);
        c.folds = j.value("folds", c.folds);
        if (j.contains("arms")) {
            c.arms.clear();
            for (const auto& a : j.at("arms")) c.arms.push_back(parse_arm(a.get<std::string>()));
        }
        c.margin_baseline = j.value("margin_baseline", c.margin_baseline);
        c.joint_model = j.value("joint_model", c.joint_model);
        c.anchor_ablation = j.value("anchor_ablation", c.anchor_ablation);
        if (j.contains("net")) {
            c.net.depth = j.at("net").value("depth", c.net.depth);
            c.net.base_width = j.at("net").value("base_width", c.net.base_width);
        }
        if (j.contains("schedules")) {
            const auto& s = j.at("schedules");
            if (s.contains("anchor")) c.anchor_schedule = schedule_from(s.at("anchor"), c.anchor_schedule);
            if (s.contains("nonanchor")) c.nonanchor_schedule = schedule_from(s.at("nonanchor"), c.nonanchor_schedule);
            if (s.contains("joint")) c.joint_schedule = schedule_from(s.at("joint"), c.joint_schedule);
            if (s.contains("lns")) c.lns_schedule = schedule_from(s.at("lns"), c.lns_schedule);
            // The search network follows the stage-L schedule unless overridden.
            c.search.net = c.lns_schedule;
            c.search.alpha_lr = 10 * c.lns_schedule.lr;
            if (s.contains("search")) {
                const auto& q = s.at("search");
                c.search.net = schedule_from(q, c.search.net);
                c.search.alpha_lr = 10 * c.search.net.lr;
                c.search.total_epochs = q.value("total_epochs", c.search.total_epochs);
                c.search.freeze_epochs = q.value("freeze_epochs", c.search.freeze_epochs);
                c.search.alpha_lr = q.value("alpha_lr", c.search.alpha_lr);
            }
        }
        const auto channels = j.value("organ_channels", std::string("soft"));
        if (channels != "soft" && channels != "hard") throw ConfigError("organ_channels must be 'soft' or 'hard'");
        c.hard_organ_channels = channels == "hard";
        c.weighted_retrain = j.value("weighted_retrain", c.weighted_retrain);
        c.top_n = j.value("top_n", c.top_n);
        c.sweep = j.value("sweep", c.sweep);
        c.baseline_perturbation = j.value("baseline_perturbation", c.baseline_perturbation);
        c.cohort = j.value("cohort", c.cohort);
        c.output = j.value("output", c.output);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
    validate(c);
    return c;
}

ExperimentConfig load_experiment(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.filename().string() + ": " + e.what());
    }
    return experiment_from_json(j);
}

std::vector<phantom::CaseRecord> generate_cohort(const phantom::PhantomConfig& config, int count,
                                                 std::uint64_t seed) {
    if (count < 1) throw ConfigError("empty cohort");
    std::vector<phantom::CaseRecord> out;
    for (int i = 0; i < count; ++i) out.push_back(phantom::generate_case(config, case_seed(seed, i), case_dir_name(i)));
    return out;
}

void save_cohort(const std::vector<phantom::CaseRecord>& cohort, const fs::path& dir) {
    fs::create_directories(dir);
    json cases = json::array();
    for (const auto& c : cohort) {
        phantom::save_case(c, dir / c.id);
        cases.push_back({{"id", c.id}, {"seed", c.seed}, {"dir", c.id}});
    }
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(cohort.empty() ? 0 : cohort.front().config_hash));
    write_text(dir / "manifest.json", json{{"count", cohort.size()}, {"config_hash", hash}, {"cases", cases}}.dump(2) + "\n");
}

std::vector<phantom::CaseRecord> load_cohort(const fs::path& dir, const phantom::PhantomConfig* expected,
                                             std::vector<std::string>* warnings) {
    const auto manifest = read_json(dir / "manifest.json");
    std::vector<phantom::CaseRecord> out;
    try {
        for (const auto& c : manifest.at("cases")) {
            out.push_back(phantom::load_case(dir / c.at("dir").get<std::string>(), expected, warnings));
            if (out.back().id != c.at("id").get<std::string>())
                throw IoError("manifest.json: case id mismatch for " + c.at("dir").get<std::string>());
        }
    } catch (const json::exception& e) {
        throw IoError(std::string("manifest.json: ") + e.what());
    }
    if (out.empty()) throw ConfigError("empty cohort");
    return out;
}

// ---------------------------------------------------------------------------

FoldRunner::FoldRunner(const ExperimentConfig& config, const std::vector<phantom::CaseRecord>& cohort,
                       const FoldManifest& manifest, int fold, fs::path dir, AccessLog& access,
                       std::function<void(const std::string&)> log)
    : config_(config), cohort_(cohort), manifest_(manifest), fold_(fold), dir_(std::move(dir)), access_(access),
      log_(std::move(log)) {
    STATIONING_REQUIRE(fold >= 0 && fold < manifest.k, "fold index out of range");
    auto find = [&](const std::string& id) {
        for (const auto& c : cohort_)
            if (c.id == id) return &c;
        throw ContractViolation("manifest names unknown case " + id);
    };
    for (const auto& id : manifest.train[fold]) train_.push_back(find(id));
    for (const auto& id : manifest.test[fold]) test_.push_back(find(id));
    layout_ = organ_layout(cohort_.front().organ_legend);
    fs::create_directories(dir_);
}

StageOptions FoldRunner::options(const std::string& tag, const segnet::TrainSchedule& schedule) const {
    StageOptions o;
    o.net.depth = config_.net.depth;
    o.net.base_width = config_.net.base_width;
    o.net.seed = derive_seed(config_.seed, tag + ".init", static_cast<std::uint64_t>(fold_));
    o.schedule = schedule;
    o.schedule.seed = derive_seed(config_.seed, tag + ".shuffle", static_cast<std::uint64_t>(fold_));
    return o;
}

segnet::Model FoldRunner::stage(const std::string& name, const std::function<segnet::Model()>& train) {
    const auto done = dir_ / (name + ".done");
    const auto ckpt = dir_ / (name + ".ckpt");
    if (fs::exists(done) && fs::exists(ckpt)) {
        for (const auto& id : read_json(done).at("cases")) access_.record(fold_, name, id.get<std::string>());
        return segnet::load_model(ckpt);
    }
    if (log_) log_("fold " + std::to_string(fold_) + ": training " + name);
    auto model = train();
    segnet::save_model(model, ckpt);
    segnet::write_loss_log(model, dir_ / (name + "_loss.csv"));
    write_text(done, json{{"cases", access_.stage_cases(fold_, name)}}.dump() + "\n");
    return model;
}

const segnet::Model& FoldRunner::anchor() {
    if (!anchor_) {
        auto o = options("anchor", config_.anchor_schedule);
        o.on_access = [this](const std::string& id) { access_.record(fold_, "anchor", id); };
        anchor_ = stage("anchor", [&] { return train_anchor(train_, o); });
    }
    return *anchor_;
}

const segnet::Model& FoldRunner::nonanchor() {
    if (!nonanchor_) {
        const auto& a = anchor();
        auto o = options("nonanchor", config_.nonanchor_schedule);
        o.on_access = [this](const std::string& id) { access_.record(fold_, "nonanchor", id); };
        nonanchor_ = stage("nonanchor", [&] { return train_nonanchor(train_, a, o); });
    }
    return *nonanchor_;
}

const segnet::Model& FoldRunner::joint() {
    if (!joint_) {
        auto o = options("joint", config_.joint_schedule);
        o.on_access = [this](const std::string& id) { access_.record(fold_, "joint", id); };
        joint_ = stage("joint", [&] { return train_joint(train_, o); });
    }
    return *joint_;
}

const OrganPrediction& FoldRunner::organs(const phantom::CaseRecord& c) {
    auto it = organs_.find(c.id);
    if (it == organs_.end()) it = organs_.emplace(c.id, predict_organs(anchor(), nonanchor(), c)).first;
    return it->second;
}

std::vector<LnsItem> FoldRunner::items(Arm arm, bool test, const std::vector<int>& channels) {
    std::vector<LnsItem> out;
    for (const auto* c : test ? test_ : train_) {
        LnsItem it;
        it.id = c->id;
        it.image = segnet::image_tensor(c->image);
        it.target = c->stations.data;
        switch (arm) {
            case Arm::ct_only: break;
            case Arm::organs_gt: it.organs = one_hot(c->organs, 1, layout_.total()); break;
            case Arm::organs_pred:
            case Arm::organs_searched: {
                const auto& p = organs(*c);
                it.organs = config_.hard_organ_channels ? one_hot(p.labels, 1, layout_.total()) : p.fused;
                if (arm == Arm::organs_searched) it.organs = select_channels(it.organs, channels);
                break;
            }
        }
        out.push_back(std::move(it));
    }
    return out;
}

const autosearch::SearchResult& FoldRunner::search() {
    if (search_) return *search_;
    const auto sdir = dir_ / "search";
    const auto done = dir_ / "search.done";
    if (fs::exists(done)) {
        for (const auto& id : read_json(done).at("cases")) access_.record(fold_, "search", id.get<std::string>());
        const auto j = read_json(sdir / "search.json");
        autosearch::SearchResult r;
        r.organ_names = j.at("organs").get<std::vector<std::string>>();
        r.alpha = j.at("alpha").get<std::vector<float>>();
        r.phi = j.at("phi").get<std::vector<float>>();
        r.alpha_history = j.at("alpha_history").get<std::vector<std::vector<float>>>();
        r.ranking = autosearch::rank_channels(r.phi);
        r.model = segnet::load_model(sdir / "model.ckpt");
        search_ = std::move(r);
        return *search_;
    }
    const auto train_items = items(Arm::organs_pred, false);
    if (log_) log_("fold " + std::to_string(fold_) + ": channel search");
    auto o = options("lns", config_.search.net);
    o.on_access = [this](const std::string& id) { access_.record(fold_, "search", id); };
    auto schedule = config_.search;
    schedule.net = o.schedule;
    auto r = autosearch::search(train_items, layout_.names, static_cast<int>(cohort_.front().station_legend.size()) + 1,
                                o, schedule);
    autosearch::write_search_outputs(r, autosearch::select_top_n(r, effective_top_n(config_)), sdir);
    segnet::save_model(r.model, sdir / "model.ckpt");
    write_text(done, json{{"cases", access_.stage_cases(fold_, "search")}}.dump() + "\n");
    search_ = std::move(r);
    return *search_;
}

std::vector<int> FoldRunner::selected(int n) { return autosearch::select_top_n(search(), n); }

std::optional<autosearch::ChannelWeights> FoldRunner::retrain_weights(int n) {
    if (!config_.weighted_retrain) return std::nullopt;
    autosearch::ChannelWeights w;
    for (int id : selected(n)) w.alpha.push_back(search().alpha[id]);
    return w;
}

segnet::Model FoldRunner::lns(Arm arm, int n) {
    std::string name = std::string("lns_") + arm_name(arm);
    std::vector<int> channels;
    std::optional<autosearch::ChannelWeights> weights;
    if (arm == Arm::organs_searched) {
        if (n <= 0) n = effective_top_n(config_);
        name += "_top" + std::to_string(n);
        channels = selected(n);
        weights = retrain_weights(n);
    }
    const int classes = static_cast<int>(cohort_.front().station_legend.size()) + 1;
    return stage(name, [&] {
        auto o = options("lns", config_.lns_schedule);
        o.on_access = [this, name](const std::string& id) { access_.record(fold_, name, id); };
        return train_lns(items(arm, false, channels), classes, o, weights);
    });
}

namespace {

struct ArmEval {
    std::vector<metrics::CaseMetrics> cases;
    int zone_correct = 0;
    int zone_total = 0;
};

json arm_json(const ArmEval& e, bool zones) {
    json cases = json::array();
    for (const auto& c : e.cases) cases.push_back(metrics::to_json(c));
    json j = {{"cases", cases}};
    if (zones) {
        j["zone_correct"] = e.zone_correct;
        j["zone_total"] = e.zone_total;
    }
    return j;
}

std::optional<metrics::ZoneMap> zone_map(const std::vector<std::string>& stations) {
    try {
        return metrics::zone_map_for_legend(stations);
    } catch (const ConfigError&) {
        return std::nullopt;
    }
}

void add_zones(ArmEval& e, const phantom::CaseRecord& c, const LabelMap& pred,
               const std::optional<metrics::ZoneMap>& zones) {
    if (!zones) return;
    for (const auto& inst : c.ln_instances) {
        e.zone_correct += metrics::zone_accuracy({inst}, pred, *zones) == 1.0;
        ++e.zone_total;
    }
}

void save_prediction(const fs::path& dir, const phantom::CaseRecord& c, const LabelMap& pred) {
    phantom::save_station_map({c.id, pred, c.station_legend, c.ln_instances}, dir / c.id);
}

}  // namespace

std::vector<metrics::CaseMetrics> FoldRunner::evaluate_lns(Arm arm, int n) {
    const auto model = lns(arm, n);
    std::vector<int> channels;
    std::optional<autosearch::ChannelWeights> weights;
    if (arm == Arm::organs_searched) {
        if (n <= 0) n = effective_top_n(config_);
        channels = selected(n);
        weights = retrain_weights(n);
    }
    const int stations = static_cast<int>(cohort_.front().station_legend.size());
    const auto test_items = items(arm, true, channels);
    std::vector<metrics::CaseMetrics> out;
    for (std::size_t i = 0; i < test_items.size(); ++i) {
        const auto pred = predict_stations(model, test_items[i], test_[i]->image.spacing, weights);
        out.push_back(metrics::evaluate_case(test_[i]->id, pred, test_[i]->stations, stations));
    }
    return out;
}

json FoldRunner::run(const std::vector<Arm>& arms) {
    const auto result_path = dir_ / "result.json";
    if (fs::exists(result_path)) return read_json(result_path);

    std::vector<std::string> train_ids, test_ids;
    for (const auto* c : train_) train_ids.push_back(c->id);
    for (const auto* c : test_) test_ids.push_back(c->id);
    json r = {{"fold", fold_}, {"train", train_ids}, {"test", test_ids}};
    const int stations = static_cast<int>(cohort_.front().station_legend.size());
    const auto zones = zone_map(cohort_.front().station_legend);

    // Organ segmentation: cascade, optional joint model and ablation.
    {
        ArmEval cascade, joint_eval, ablation;
        for (const auto* c : test_) {
            cascade.cases.push_back(metrics::evaluate_case(c->id, organs(*c).labels, c->organs, layout_.total()));
            if (config_.anchor_ablation) {
                const auto p = predict_organs(anchor(), nonanchor(), *c, true);
                ablation.cases.push_back(metrics::evaluate_case(c->id, p.labels, c->organs, layout_.total()));
            }
        }
        r["organs"]["cascade"] = arm_json(cascade, false);
        if (config_.anchor_ablation) r["organs"]["zero_anchor_channels"] = arm_json(ablation, false);
        if (config_.joint_model) {
            const auto& j = joint();
            for (const auto* c : test_)
                joint_eval.cases.push_back(metrics::evaluate_case(
                    c->id, segnet::predict_labels(j, segnet::image_tensor(c->image), c->image.spacing), c->organs,
                    layout_.total()));
            r["organs"]["joint"] = arm_json(joint_eval, false);
        }
    }

    for (Arm arm : arms) {
        ArmEval e;
        const auto model = lns(arm);
        std::vector<int> channels;
        std::optional<autosearch::ChannelWeights> weights;
        if (arm == Arm::organs_searched) {
            channels = selected(effective_top_n(config_));
            weights = retrain_weights(effective_top_n(config_));
            auto s = autosearch::to_json(search(), channels);
            s.erase("alpha_history");
            r["search"] = s;
        }
        const auto test_items = items(arm, true, channels);
        for (std::size_t i = 0; i < test_items.size(); ++i) {
            const auto pred = predict_stations(model, test_items[i], test_[i]->image.spacing, weights);
            e.cases.push_back(metrics::evaluate_case(test_[i]->id, pred, test_[i]->stations, stations));
            add_zones(e, *test_[i], pred, zones);
            save_prediction(dir_ / "pred" / arm_name(arm), *test_[i], pred);
        }
        r["arms"][arm_name(arm)] = arm_json(e, zones.has_value());
    }

    if (config_.margin_baseline) {
        ArmEval e;
        const auto rules = phantom::perturb_rules(config_.phantom.rules, config_.baseline_perturbation,
                                                  derive_seed(config_.seed, "baseline", static_cast<std::uint64_t>(fold_)));
        for (const auto* c : test_) {
            const auto pred = phantom::margin_infer_baseline(organs(*c).labels, layout_.names, rules).labels;
            e.cases.push_back(metrics::evaluate_case(c->id, pred, c->stations, stations));
            add_zones(e, *c, pred, zones);
            save_prediction(dir_ / "pred" / "margin_baseline", *c, pred);
        }
        r["arms"]["margin_baseline"] = arm_json(e, zones.has_value());
    }

    // Leakage: no training stage of this fold may have read a test case.
    const auto touched = access_.touched(fold_);
    for (const auto& id : test_ids)
        if (touched.count(id)) throw LeakageError("fold " + std::to_string(fold_) + " training read test case " + id);
    r["touched"] = std::vector<std::string>(touched.begin(), touched.end());

    write_text(result_path, r.dump(1) + "\n");
    return r;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<metrics::CaseMetrics> cases_of(const json& arm) {
    std::vector<metrics::CaseMetrics> out;
    for (const auto& c : arm.at("cases")) out.push_back(metrics::case_metrics_from_json(c));
    return out;
}

double mean_rows(const metrics::MetricsReport& r, std::size_t from, std::size_t to) {
    double s = 0;
    int n = 0;
    for (std::size_t i = from; i < to && i < r.rows.size(); ++i)
        if (!r.rows[i].absent) s += r.rows[i].dice.mean, ++n;
    return n ? s / n : std::nan("");
}

json null_if_nan(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

}  // namespace

json build_report(const ExperimentConfig& config, const std::vector<json>& folds,
                  const std::vector<std::string>& station_names, const std::vector<std::string>& organ_names) {
    STATIONING_REQUIRE(!folds.empty(), "no fold results to merge");
    json report;
    report["tool_version"] = kToolVersion;
    report["seed"] = config.seed;
    report["folds"] = folds.size();
    report["stations"] = station_names;
    std::vector<int> fold_ids;
    for (const auto& f : folds) fold_ids.push_back(f.at("fold").get<int>());
    report["fold_order"] = fold_ids;

    std::vector<std::string> arm_names;
    for (Arm a : config.arms) arm_names.push_back(arm_name(a));
    if (config.margin_baseline) arm_names.push_back("margin_baseline");
    report["arm_order"] = arm_names;

    for (const auto& name : arm_names) {
        std::vector<metrics::CaseMetrics> pooled;
        json per_fold = json::array();
        int correct = 0, total = 0;
        for (const auto& f : folds) {
            const auto& arm = f.at("arms").at(name);
            const auto cases = cases_of(arm);
            pooled.insert(pooled.end(), cases.begin(), cases.end());
            per_fold.push_back(metrics::summarize(cases, station_names).average.dice.mean);
            correct += arm.value("zone_correct", 0);
            total += arm.value("zone_total", 0);
        }
        const auto summary = metrics::summarize(pooled, station_names);
        int excluded = 0;
        for (const auto& c : pooled)
            for (const auto& m : c.classes) excluded += m.present && std::isnan(m.hd);
        report["arms"][name] = {{"summary", metrics::to_json(summary)},
                                {"mean_dice", summary.average.dice.mean},
                                {"per_fold_mean_dice", per_fold},
                                {"zone_accuracy", total ? json(double(correct) / total) : json(nullptr)},
                                {"zone_instances", total},
                                {"surface_metrics_excluded", excluded}};
    }

    // Organ segmentation blocks.
    const auto anchors = static_cast<std::size_t>(organ_layout([&] {
                                                      std::vector<phantom::OrganInfo> l;
                                                      for (const auto& o : config.phantom.organs)
                                                          l.push_back({o.name, o.anchor, o.air});
                                                      return l;
                                                  }())
                                                      .anchors);
    for (const char* model : {"cascade", "joint", "zero_anchor_channels"}) {
        if (!folds.front().at("organs").contains(model)) continue;
        std::vector<metrics::CaseMetrics> pooled;
        json per_fold = json::array();
        for (const auto& f : folds) {
            const auto cases = cases_of(f.at("organs").at(model));
            pooled.insert(pooled.end(), cases.begin(), cases.end());
            const auto s = metrics::summarize(cases, organ_names);
            per_fold.push_back({{"anchor_mean_dice", null_if_nan(mean_rows(s, 0, anchors))},
                                {"nonanchor_mean_dice", null_if_nan(mean_rows(s, anchors, organ_names.size()))}});
        }
        const auto s = metrics::summarize(pooled, organ_names);
        report["organs"][model] = {{"summary", metrics::to_json(s)},
                                   {"anchor_mean_dice", null_if_nan(mean_rows(s, 0, anchors))},
                                   {"nonanchor_mean_dice", null_if_nan(mean_rows(s, anchors, organ_names.size()))},
                                   {"per_fold", per_fold}};
    }

    json search = json::array();
    for (const auto& f : folds)
        if (f.contains("search")) {
            auto s = f.at("search");
            s["fold"] = f.at("fold");
            search.push_back(s);
        }
    if (!search.empty()) report["search"] = search;
    return report;
}

std::string report_csv(const json& report) {
    std::ostringstream out;
    const auto arms = report.at("arm_order").get<std::vector<std::string>>();
    out << "metric,class";
    for (const auto& a : arms) out << ',' << a;
    out << '\n';
    const struct {
        const char* label;
        const char* key;
    } blocks[] = {{"DSC", "dice_text"}, {"HD", "hd_text"}, {"ASD", "asd_text"}};
    const auto stations = report.at("stations").get<std::vector<std::string>>();
    for (const auto& b : blocks) {
        for (std::size_t s = 0; s <= stations.size(); ++s) {
            out << b.label << ',' << (s < stations.size() ? stations[s] : std::string("Average"));
            for (const auto& a : arms) {
                const auto& summary = report.at("arms").at(a).at("summary");
                const auto& row = s < stations.size() ? summary.at("rows").at(s) : summary.at("average");
                out << ',' << row.at(b.key).get<std::string>();
            }
            out << '\n';
        }
    }
    return out.str();
}

namespace {

std::string per_case_csv(const ExperimentConfig& config, const std::vector<json>& folds) {
    std::ostringstream out;
    out << "arm,fold,case,class,dice,hd_mm,asd_mm\n";
    const auto stations = phantom::station_names(config.phantom);
    for (const auto& f : folds)
        for (const auto& [arm, data] : f.at("arms").items())
            for (const auto& c : cases_of(data))
                for (std::size_t k = 0; k < c.classes.size(); ++k) {
                    if (!c.classes[k].present) continue;
                    out << arm << ',' << f.at("fold").get<int>() << ',' << c.case_id << ',' << stations[k] << ','
                        << fmt(c.classes[k].dice) << ',' << fmt(c.classes[k].hd) << ',' << fmt(c.classes[k].asd) << '\n';
                }
    return out.str();
}

std::string fold_csv(const json& report) {
    std::ostringstream out;
    out << "fold,arm,mean_dice\n";
    const auto order = report.at("fold_order").get<std::vector<int>>();
    for (const auto& a : report.at("arm_order").get<std::vector<std::string>>()) {
        const auto& per = report.at("arms").at(a).at("per_fold_mean_dice");
        for (std::size_t i = 0; i < order.size(); ++i) out << order[i] << ',' << a << ',' << fmt(per[i].get<double>()) << '\n';
    }
    return out.str();
}

}  // namespace

namespace {

fs::path output_dir(const ExperimentConfig& config, const RunOptions& options) {
    return options.output.empty() ? fs::path(config.output) : options.output;
}

std::function<void(const std::string&)> serialized_log(const RunOptions& options) {
    if (!options.log) return {};
    auto mu = std::make_shared<std::mutex>();
    return [mu, log = options.log](const std::string& m) {
        std::lock_guard lock(*mu);
        log(m);
    };
}

json frozen_config(const ExperimentConfig& config) {
    return {{"tool_version", kToolVersion}, {"config", to_json(config)}};
}

void write_report_files(const json& report, const ExperimentConfig& config, const std::vector<json>& folds,
                        const fs::path& out) {
    write_text(out / "report.csv", report_csv(report));
    write_text(out / "per_case.csv", per_case_csv(config, folds));
    write_text(out / "fold_metrics.csv", fold_csv(report));
    write_text(out / "report.json", report.dump(2) + "\n");
}

std::vector<std::string> organ_names_of(const phantom::PhantomConfig& config) {
    std::vector<std::string> names;
    for (const auto& o : config.organs) names.push_back(o.name);
    return names;
}

// Runs `job(f)` for every fold in `folds` on up to `jobs` threads. Results
// come back in completion order; the first failure is rethrown.
std::vector<std::pair<int, json>> for_folds(const std::vector<int>& folds, int jobs,
                                            const std::function<json(int)>& job) {
    std::vector<std::pair<int, json>> done;
    std::mutex mu;
    std::exception_ptr failure;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < folds.size(); i = next++) {
            {
                std::lock_guard lock(mu);
                if (failure) return;
            }
            try {
                auto r = job(folds[i]);
                std::lock_guard lock(mu);
                done.emplace_back(folds[i], std::move(r));
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int n = std::max(1, std::min<int>(jobs, static_cast<int>(folds.size())));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < n; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return done;
}

std::vector<int> fold_list(const ExperimentConfig& config, const std::vector<int>& folds) {
    if (folds.empty()) {
        std::vector<int> all(static_cast<std::size_t>(config.folds));
        for (int f = 0; f < config.folds; ++f) all[f] = f;
        return all;
    }
    for (int f : folds)
        if (f < 0 || f >= config.folds) throw ConfigError("fold " + std::to_string(f) + " out of range");
    return folds;
}

}  // namespace

Workspace open_workspace(const ExperimentConfig& config, const RunOptions& options, bool refuse_finished) {
    validate(config);
    Workspace w;
    w.dir = output_dir(config, options);
    const auto frozen = frozen_config(config);
    if (fs::exists(w.dir)) {
        if (options.force) {
            fs::remove_all(w.dir);
        } else if (refuse_finished && fs::exists(w.dir / "report.json")) {
            throw ConfigError("output directory " + w.dir.string() + " already holds a finished run (use --force)");
        } else if (fs::exists(w.dir / "config.json") && read_json(w.dir / "config.json") != frozen) {
            throw ConfigError("output directory " + w.dir.string() + " holds a different experiment (use --force)");
        }
    }
    fs::create_directories(w.dir);
    write_text(w.dir / "config.json", frozen.dump(2) + "\n");

    if (!config.cohort.empty()) {
        w.cohort = load_cohort(config.cohort, &config.phantom, &w.warnings);
    } else if (fs::exists(w.dir / "cohort" / "manifest.json")) {
        w.cohort = load_cohort(w.dir / "cohort", &config.phantom, &w.warnings);
    } else {
        if (options.log) options.log("generating " + std::to_string(config.cohort_size) + " cases");
        w.cohort = generate_cohort(config.phantom, config.cohort_size, config.phantom.seed);
        save_cohort(w.cohort, w.dir / "cohort");
    }
    const auto organs = organ_names_of(config.phantom);
    for (const auto& c : w.cohort) {
        std::vector<std::string> names;
        for (const auto& o : c.organ_legend) names.push_back(o.name);
        if (names != organs || c.station_legend != phantom::station_names(config.phantom))
            throw ConfigError("cohort legend does not match the phantom config (case " + c.id + ")");
    }
    if (static_cast<int>(w.cohort.size()) < config.folds)
        throw ConfigError("cohort of " + std::to_string(w.cohort.size()) + " cases is smaller than the fold count");

    std::vector<std::string> ids;
    for (const auto& c : w.cohort) ids.push_back(c.id);
    w.manifest = make_folds(ids, config.folds, config.seed);
    check_manifest(w.manifest, ids);
    write_text(w.dir / "manifest.json", to_json(w.manifest).dump(2) + "\n");
    return w;
}

json run_cv(const ExperimentConfig& config, const RunOptions& options) {
    const auto log = serialized_log(options);
    auto ws = open_workspace(config, options, true);
    for (const auto& w : ws.warnings)
        if (log) log("warning: " + w);

    AccessLog access;
    auto done = for_folds(fold_list(config, {}), options.jobs, [&](int f) {
        FoldRunner runner(config, ws.cohort, ws.manifest, f, ws.dir / ("fold_" + std::to_string(f)), access, log);
        auto r = runner.run(config.arms);
        if (log) log("fold " + std::to_string(f) + ": done");
        return r;
    });
    access.check(ws.manifest);

    if (options.deterministic)
        std::sort(done.begin(), done.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<json> ordered;
    for (auto& [f, r] : done) ordered.push_back(std::move(r));
    auto report = build_report(config, ordered, phantom::station_names(config.phantom), organ_names_of(config.phantom));
    write_report_files(report, config, ordered, ws.dir);
    return report;
}

json run_search(const ExperimentConfig& config, const RunOptions& options, int top_n, const std::vector<int>& folds) {
    const auto organs = static_cast<int>(config.phantom.organs.size());
    if (top_n < 1 || top_n > organs)
        throw ConfigError("--top " + std::to_string(top_n) + " exceeds the organ count (" + std::to_string(organs) + ")");
    const auto log = serialized_log(options);
    auto ws = open_workspace(config, options, false);
    AccessLog access;
    auto done = for_folds(fold_list(config, folds), options.jobs, [&](int f) {
        const auto dir = ws.dir / ("fold_" + std::to_string(f));
        FoldRunner runner(config, ws.cohort, ws.manifest, f, dir, access, log);
        const auto& r = runner.search();
        const auto selected = autosearch::select_top_n(r, top_n);
        autosearch::write_search_outputs(r, selected, dir / "search");
        auto j = autosearch::to_json(r, selected);
        j.erase("alpha_history");
        j["fold"] = f;
        return j;
    });
    access.check(ws.manifest);
    std::sort(done.begin(), done.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    json out = {{"top_n", top_n}, {"folds", json::array()}};
    for (auto& [f, j] : done) out["folds"].push_back(std::move(j));
    write_text(ws.dir / "search.json", out.dump(2) + "\n");
    return out;
}

json run_sweep(const ExperimentConfig& config, const RunOptions& options, const std::vector<int>& n_values,
               const std::vector<int>& folds) {
    if (n_values.empty()) throw ConfigError("no n values to sweep");
    const auto organs = static_cast<int>(config.phantom.organs.size());
    for (int n : n_values)
        if (n < 1 || n > organs)
            throw ConfigError("sweep value " + std::to_string(n) + " exceeds the organ count (" + std::to_string(organs) + ")");
    const auto log = serialized_log(options);
    auto ws = open_workspace(config, options, false);
    const auto fl = fold_list(config, folds);
    const auto stations = phantom::station_names(config.phantom);
    AccessLog access;
    auto done = for_folds(fl, options.jobs, [&](int f) {
        FoldRunner runner(config, ws.cohort, ws.manifest, f, ws.dir / ("fold_" + std::to_string(f)), access, log);
        json per_n = json::array();
        for (int n : n_values) {
            const auto cases = runner.evaluate_lns(Arm::organs_searched, n);
            std::vector<std::string> names;
            for (int id : runner.selected(n)) names.push_back(config.phantom.organs[id].name);
            per_n.push_back({{"n", n},
                             {"selected", names},
                             {"mean_dice", metrics::summarize(cases, stations).average.dice.mean}});
        }
        return json{{"fold", f}, {"results", per_n}};
    });
    access.check(ws.manifest);
    std::sort(done.begin(), done.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    std::ostringstream csv;
    csv << "n,mean_dice,std_dice";
    for (const auto& [f, j] : done) csv << ",fold_" << f;
    csv << '\n';
    json rows = json::array();
    for (std::size_t k = 0; k < n_values.size(); ++k) {
        std::vector<double> dice;
        for (const auto& [f, j] : done) dice.push_back(j.at("results").at(k).at("mean_dice").get<double>());
        const auto ms = metrics::mean_std(dice);
        csv << n_values[k] << ',' << fmt(ms.mean) << ',' << fmt(ms.std);
        for (double d : dice) csv << ',' << fmt(d);
        csv << '\n';
        rows.push_back({{"n", n_values[k]}, {"mean_dice", ms.mean}, {"std_dice", ms.std}, {"per_fold", dice}});
    }
    json out = {{"rows", rows}, {"folds", json::array()}};
    for (auto& [f, j] : done) out["folds"].push_back(std::move(j));
    write_text(ws.dir / "sweep.csv", csv.str());
    write_text(ws.dir / "sweep.json", out.dump(2) + "\n");
    return out;
}

json rebuild_report(const fs::path& dir) {
    const auto frozen = read_json(dir / "config.json");
    const auto config = experiment_from_json(frozen.at("config"));
    std::vector<json> folds;
    for (int f = 0; f < config.folds; ++f) {
        const auto p = dir / ("fold_" + std::to_string(f)) / "result.json";
        if (!fs::exists(p)) throw IoError("fold " + std::to_string(f) + " has no result.json; finish the run first");
        folds.push_back(read_json(p));
    }
    auto report = build_report(config, folds, phantom::station_names(config.phantom), organ_names_of(config.phantom));
    write_report_files(report, config, folds, dir);
    return report;
}

}  // namespace stationing::pipeline
