// Command-line front end: gen, run, search, sweep, eval, report.
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stationing/core/error.hpp"
#include "stationing/metrics/zones.hpp"
#include "stationing/pipeline/evaluate.hpp"
#include "stationing/pipeline/experiment.hpp"

namespace fs = std::filesystem;
using namespace stationing;
using namespace stationing::pipeline;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;

struct Common {
    std::string config;
    std::string out;
    int jobs = 1;
    bool force = false;
    bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "Experiment config (JSON); defaults apply when omitted")->check(CLI::ExistingFile);
    cmd->add_option("--out", c.out, "Output directory (overrides the config)");
    cmd->add_option("--jobs", c.jobs, "Fold jobs run in parallel")->check(CLI::PositiveNumber);
    cmd->add_flag("--force", c.force, "Clear an existing output directory first");
    cmd->add_flag("-q,--quiet", c.quiet, "No progress messages");
}

ExperimentConfig resolve(const Common& c) {
    auto config = c.config.empty() ? default_experiment_config() : load_experiment(c.config);
    if (!c.out.empty()) config.output = c.out;
    return config;
}

RunOptions run_options(const Common& c, const ExperimentConfig& config) {
    RunOptions o;
    o.output = config.output;
    o.force = c.force;
    o.jobs = c.jobs;
    const char* det = std::getenv("STATIONING_DETERMINISTIC");
    o.deterministic = !(det && std::string(det) == "0");
    if (!c.quiet) o.log = [](const std::string& m) { std::cerr << "[stationing] " << m << '\n'; };
    return o;
}

std::vector<Arm> parse_arms(const std::vector<std::string>& names) {
    std::vector<Arm> arms;
    for (const auto& n : names) arms.push_back(parse_arm(n));
    return arms;
}

void print_search(const nlohmann::json& s) {
    for (const auto& f : s.at("folds")) {
        std::cout << "fold " << f.at("fold").get<int>() << " ranking:";
        for (const auto& r : f.at("ranking"))
            std::cout << ' ' << r.at("organ").get<std::string>() << '(' << r.at("phi").get<double>() << ')';
        std::cout << "\n  selected:";
        for (const auto& n : f.at("selected")) std::cout << ' ' << n.get<std::string>();
        std::cout << '\n';
    }
}

void print_report(const nlohmann::json& report) {
    for (const auto& arm : report.at("arm_order")) {
        const auto& a = report.at("arms").at(arm.get<std::string>());
        std::cout << arm.get<std::string>() << ": mean Dice " << a.at("summary").at("average").at("dice_text").get<std::string>();
        if (!a.at("zone_accuracy").is_null()) std::cout << ", zone accuracy " << a.at("zone_accuracy").get<double>();
        std::cout << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lymph node station segmentation experiments on synthetic thorax phantoms"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    Common common;

    auto* gen = app.add_subcommand("gen", "Generate a phantom cohort");
    int count = -1;
    std::uint64_t seed = 0;
    bool seed_given = false;
    gen->add_option("--config", common.config, "Experiment or phantom config (JSON)")->check(CLI::ExistingFile);
    gen->add_option("--out", common.out, "Cohort directory")->required();
    gen->add_option("--count", count, "Number of cases (default: the config's cohort size)");
    gen->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { seed = s, seed_given = true; }, "Cohort seed");

    auto* run = app.add_subcommand("run", "Cross-validated experiment over all arms");
    std::vector<std::string> arms;
    int folds = 0;
    std::string cohort;
    add_common(run, common);
    run->add_option("--arms", arms, "Arms: ct_only organs_gt organs_pred organs_searched")->delimiter(',');
    run->add_option("--folds", folds, "Fold count (overrides the config)");
    run->add_option("--cohort", cohort, "Existing cohort directory")->check(CLI::ExistingDirectory);

    auto* search = app.add_subcommand("search", "Differentiable organ-channel search per fold");
    int top = 0;
    std::vector<int> fold_ids;
    add_common(search, common);
    search->add_option("--top", top, "Number of organs to select")->required();
    search->add_option("--fold", fold_ids, "Restrict to these folds")->delimiter(',');
    search->add_option("--cohort", cohort, "Existing cohort directory")->check(CLI::ExistingDirectory);

    auto* sweep = app.add_subcommand("sweep", "Stage-L retraining for several top-n values");
    std::vector<int> n_values;
    add_common(sweep, common);
    sweep->add_option("--n-values", n_values, "Top-n values (default: the config's sweep)")->delimiter(',');
    sweep->add_option("--fold", fold_ids, "Restrict to these folds")->delimiter(',');
    sweep->add_option("--cohort", cohort, "Existing cohort directory")->check(CLI::ExistingDirectory);

    auto* eval = app.add_subcommand("eval", "Score predicted station maps against references");
    std::string pred_dir, gt_dir, zones_file, eval_out;
    eval->add_option("--pred", pred_dir, "Prediction directory")->required();
    eval->add_option("--gt", gt_dir, "Reference directory")->required();
    eval->add_option("--zones", zones_file, "Zone map (JSON)")->check(CLI::ExistingFile);
    eval->add_option("--out", eval_out, "Where to write eval.json and the CSVs (default: --pred)");

    auto* report = app.add_subcommand("report", "Rebuild report files of a run from its frozen config");
    std::string run_dir;
    report->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*gen) {
            ExperimentConfig config = default_experiment_config();
            if (!common.config.empty()) {
                // A bare phantom config is accepted as well as a full experiment config.
                std::ifstream in(common.config);
                const auto j = nlohmann::json::parse(in, nullptr, false);
                if (j.is_discarded()) throw ConfigError(common.config + ": malformed JSON");
                if (j.contains("organs") || j.contains("preset") || j.contains("rules"))
                    config.phantom = j.get<phantom::PhantomConfig>();
                else
                    config = experiment_from_json(j);
            }
            if (seed_given) config.phantom.seed = seed;
            if (count < 0) count = config.cohort_size;
            if (count == 0) throw ConfigError("empty cohort");
            phantom::validate(config.phantom);
            const auto cases = generate_cohort(config.phantom, count, config.phantom.seed);
            save_cohort(cases, common.out);
            std::cout << "wrote " << cases.size() << " cases to " << common.out << '\n';
            return kOk;
        }
        if (*eval) {
            std::optional<metrics::ZoneMap> zones;
            if (!zones_file.empty()) zones = metrics::load_zone_map(zones_file);
            const auto result = evaluate_directories(pred_dir, gt_dir, zones ? &*zones : nullptr);
            write_eval_outputs(result, eval_out.empty() ? pred_dir : eval_out);
            for (const auto& r : result.summary.rows)
                std::cout << r.name << ": DSC " << metrics::format_mean_std(r.dice, 100.0) << ", HD "
                          << metrics::format_mean_std(r.hd) << ", ASD " << metrics::format_mean_std(r.asd) << '\n';
            std::cout << "Average: DSC " << metrics::format_mean_std(result.summary.average.dice, 100.0) << '\n';
            if (result.zone_total > 0)
                std::cout << "zone accuracy " << result.zone_correct << '/' << result.zone_total << '\n';
            return kOk;
        }
        if (*report) {
            print_report(rebuild_report(run_dir));
            return kOk;
        }

        auto config = resolve(common);
        if (!cohort.empty()) config.cohort = cohort;
        if (*run) {
            if (!arms.empty()) config.arms = parse_arms(arms);
            if (folds > 0) config.folds = folds;
            validate(config);
            print_report(run_cv(config, run_options(common, config)));
            std::cout << "report written to " << config.output << "/report.csv\n";
        } else if (*search) {
            print_search(run_search(config, run_options(common, config), top, fold_ids));
        } else if (*sweep) {
            if (n_values.empty()) n_values = config.sweep;
            const auto s = run_sweep(config, run_options(common, config), n_values, fold_ids);
            for (const auto& r : s.at("rows"))
                std::cout << "n=" << r.at("n").get<int>() << ": mean Dice " << r.at("mean_dice").get<double>() << '\n';
        }
        return kOk;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
}
