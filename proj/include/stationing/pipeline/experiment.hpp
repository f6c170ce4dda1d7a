#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stationing/autosearch/search.hpp"
#include "stationing/metrics/summary.hpp"
#include "stationing/phantom/config.hpp"
#include "stationing/phantom/phantom.hpp"
#include "stationing/pipeline/cascade.hpp"
#include "stationing/pipeline/folds.hpp"
#include "stationing/segnet/segnet.hpp"

namespace stationing::pipeline {

inline constexpr const char* kToolVersion = "0.1.0";

enum class Arm { ct_only, organs_gt, organs_pred, organs_searched };

const char* arm_name(Arm arm);
Arm parse_arm(const std::string& name);  // ConfigError on unknown names
std::vector<Arm> all_arms();

struct ExperimentConfig {
    phantom::PhantomConfig phantom = phantom::default_phantom_config();
    int cohort_size = 24;
    int folds = 4;
    std::vector<Arm> arms = all_arms();
    bool margin_baseline = true;  // margin rules on predicted organs, perturbed
    bool joint_model = true;      // all-organ model for the stratification comparison
    bool anchor_ablation = true;  // stage B with zeroed anchor channels at test time
    segnet::NetConfig net;        // depth, base width; the rest is set per stage
    segnet::TrainSchedule anchor_schedule{60};
    segnet::TrainSchedule nonanchor_schedule{60};
    segnet::TrainSchedule joint_schedule{60};
    segnet::TrainSchedule lns_schedule{80};
    autosearch::SearchSchedule search;
    bool hard_organ_channels = false;  // one-hot organ predictions instead of probabilities
    bool weighted_retrain = false;     // scale selected channels by their phi in the final retrain
    int top_n = 0;                     // 0 = number of key organs in the phantom config
    std::vector<int> sweep = {1, 3, 6, 9};
    double baseline_perturbation = 0.25;
    std::string cohort;  // existing cohort directory; empty = generate into <output>/cohort
    std::string output = "runs/experiment";
    std::uint64_t seed = 17;
};

ExperimentConfig default_experiment_config();
// Throws ConfigError on unknown arms, bad sizes and invalid nested configs.
void validate(const ExperimentConfig& config);
int effective_top_n(const ExperimentConfig& config);

nlohmann::json to_json(const ExperimentConfig& config);
// Missing fields keep the defaults. Throws ConfigError.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);

// Cohort generation: case i gets seed case_seed(config seed, i) and id
// "case_NNN". Writes manifest.json next to the case directories.
std::vector<phantom::CaseRecord> generate_cohort(const phantom::PhantomConfig& config, int count,
                                                 std::uint64_t seed);
void save_cohort(const std::vector<phantom::CaseRecord>& cohort, const std::filesystem::path& dir);
std::vector<phantom::CaseRecord> load_cohort(const std::filesystem::path& dir,
                                             const phantom::PhantomConfig* expected = nullptr,
                                             std::vector<std::string>* warnings = nullptr);

struct RunOptions {
    std::filesystem::path output;
    bool force = false;
    int jobs = 1;
    // false: fold results are merged in completion order.
    bool deterministic = true;
    std::function<void(const std::string&)> log;
};

// Stage names used for checkpoints, resume markers and the access log.
// Everything under <output>/fold_<k>/.
class FoldRunner {
public:
    FoldRunner(const ExperimentConfig& config, const std::vector<phantom::CaseRecord>& cohort,
               const FoldManifest& manifest, int fold, std::filesystem::path dir, AccessLog& access,
               std::function<void(const std::string&)> log = {});

    const segnet::Model& anchor();
    const segnet::Model& nonanchor();
    const segnet::Model& joint();
    const OrganPrediction& organs(const phantom::CaseRecord& c);
    const autosearch::SearchResult& search();
    std::vector<int> selected(int n);

    // Stage-L items for train or test cases: organ channels per arm.
    std::vector<LnsItem> items(Arm arm, bool test, const std::vector<int>& channels = {});
    // Trains (or reloads) stage L for `arm`; for organs_searched `n` picks
    // the top-n channels.
    segnet::Model lns(Arm arm, int n = 0);
    std::vector<metrics::CaseMetrics> evaluate_lns(Arm arm, int n = 0);

    // Everything the report needs from this fold.
    nlohmann::json run(const std::vector<Arm>& arms);

    const std::vector<const phantom::CaseRecord*>& train_cases() const { return train_; }
    const std::vector<const phantom::CaseRecord*>& test_cases() const { return test_; }

private:
    segnet::Model stage(const std::string& name, const std::function<segnet::Model()>& train);
    StageOptions options(const std::string& tag, const segnet::TrainSchedule& schedule) const;
    std::optional<autosearch::ChannelWeights> retrain_weights(int n);

    const ExperimentConfig& config_;
    const std::vector<phantom::CaseRecord>& cohort_;
    const FoldManifest& manifest_;
    int fold_;
    std::filesystem::path dir_;
    AccessLog& access_;
    std::function<void(const std::string&)> log_;
    std::vector<const phantom::CaseRecord*> train_;
    std::vector<const phantom::CaseRecord*> test_;
    OrganLayout layout_;
    std::optional<segnet::Model> anchor_, nonanchor_, joint_;
    std::optional<autosearch::SearchResult> search_;
    std::map<std::string, OrganPrediction> organs_;
};

// Output directory with its frozen config.json, cohort and fold manifest.
// Refuses a directory whose frozen config differs, and one holding a
// finished report when `refuse_finished` is set (unless options.force,
// which clears the directory first).
struct Workspace {
    std::filesystem::path dir;
    std::vector<phantom::CaseRecord> cohort;
    FoldManifest manifest;
    std::vector<std::string> warnings;
};
Workspace open_workspace(const ExperimentConfig& config, const RunOptions& options, bool refuse_finished);

// Full cross-validation: writes config.json (frozen), manifest.json,
// fold_<k>/..., report.json, report.csv, per_case.csv, fold_metrics.csv.
// Resumes an unfinished directory with the same frozen config.
nlohmann::json run_cv(const ExperimentConfig& config, const RunOptions& options);

// Channel search on the training part of each listed fold (all folds when
// empty); persists fold_<k>/search/ with the top-n selection.
nlohmann::json run_search(const ExperimentConfig& config, const RunOptions& options, int top_n,
                          const std::vector<int>& folds = {});

// Retrains stage L on the top-n searched channels for every n and writes
// sweep.csv (one row per n) and sweep.json.
nlohmann::json run_sweep(const ExperimentConfig& config, const RunOptions& options, const std::vector<int>& n_values,
                         const std::vector<int>& folds = {});

// Rebuilds the report files of a run directory from its frozen config and
// fold results alone.
nlohmann::json rebuild_report(const std::filesystem::path& dir);

// Merges fold results (ordered as given) into the report.
nlohmann::json build_report(const ExperimentConfig& config, const std::vector<nlohmann::json>& folds,
                            const std::vector<std::string>& station_names,
                            const std::vector<std::string>& organ_names);
std::string report_csv(const nlohmann::json& report);

}  // namespace stationing::pipeline
