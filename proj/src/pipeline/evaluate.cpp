#include "stationing/pipeline/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "stationing/core/error.hpp"
#include "stationing/phantom/phantom.hpp"

namespace stationing::pipeline {

namespace fs = std::filesystem;

namespace {

std::string legend_diff(const std::vector<std::string>& pred, const std::vector<std::string>& gt) {
    std::string out;
    const auto n = std::max(pred.size(), gt.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = i < pred.size() ? pred[i] : std::string("<none>");
        const auto g = i < gt.size() ? gt[i] : std::string("<none>");
        if (p == g) continue;
        if (!out.empty()) out += ", ";
        out += "label " + std::to_string(i + 1) + ": " + p + " vs " + g;
    }
    return out;
}

std::string num(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

EvalOutput evaluate_directories(const fs::path& pred_dir, const fs::path& gt_dir, const metrics::ZoneMap* zones) {
    if (!fs::is_directory(gt_dir)) throw IoError("reference directory not found: " + gt_dir.string());
    if (!fs::is_directory(pred_dir)) throw IoError("prediction directory not found: " + pred_dir.string());
    std::vector<fs::path> cases;
    for (const auto& e : fs::directory_iterator(gt_dir))
        if (e.is_directory() && fs::exists(e.path() / "meta.json")) cases.push_back(e.path().filename());
    std::sort(cases.begin(), cases.end());
    if (cases.empty()) throw IoError("no case directories under " + gt_dir.string());

    EvalOutput out;
    std::optional<metrics::ZoneMap> legend_zones;
    for (const auto& name : cases) {
        const auto gt = phantom::load_station_map(gt_dir / name);
        if (!fs::exists(pred_dir / name / "meta.json"))
            throw IoError("no prediction for case " + name.string() + " under " + pred_dir.string());
        const auto pred = phantom::load_station_map(pred_dir / name);
        if (out.class_names.empty()) {
            out.class_names = gt.station_legend;
            if (!zones) {
                try {
                    legend_zones = metrics::zone_map_for_legend(gt.station_legend);
                } catch (const ConfigError&) {
                }
            }
        }
        if (gt.station_legend != out.class_names)
            throw ConfigError("reference legends differ between cases (" + legend_diff(gt.station_legend, out.class_names) + ")");
        if (pred.station_legend != gt.station_legend)
            throw ConfigError("station legend mismatch for " + name.string() + " (prediction vs reference: " +
                              legend_diff(pred.station_legend, gt.station_legend) + ")");
        if (!(pred.labels.extents == gt.labels.extents))
            throw ConfigError("grid mismatch for " + name.string());
        out.cases.push_back(metrics::evaluate_case(gt.id, pred.labels, gt.labels, static_cast<int>(gt.station_legend.size())));

        const auto* zm = zones ? zones : (legend_zones ? &*legend_zones : nullptr);
        if (zm && !gt.ln_instances.empty()) {
            for (const auto& inst : gt.ln_instances) {
                out.zone_correct += metrics::zone_accuracy({inst}, pred.labels, *zm) == 1.0 ? 1 : 0;
                ++out.zone_total;
            }
        }
    }
    out.summary = metrics::summarize(out.cases, out.class_names);
    return out;
}

void write_eval_outputs(const EvalOutput& eval, const fs::path& dir) {
    fs::create_directories(dir);
    nlohmann::json cases = nlohmann::json::array();
    for (const auto& c : eval.cases) cases.push_back(metrics::to_json(c));
    nlohmann::json j = {{"classes", eval.class_names}, {"summary", metrics::to_json(eval.summary)}, {"cases", cases}};
    if (eval.zone_total > 0) {
        j["zone_correct"] = eval.zone_correct;
        j["zone_total"] = eval.zone_total;
        j["zone_accuracy"] = static_cast<double>(eval.zone_correct) / eval.zone_total;
    }
    std::ofstream(dir / "eval.json", std::ios::trunc) << j.dump(2) << '\n';

    std::ofstream summary(dir / "summary.csv", std::ios::trunc);
    summary << "class,dice,hd_mm,asd_mm\n";
    auto row = [&](const metrics::SummaryRow& r) {
        summary << r.name << ',' << metrics::format_mean_std(r.dice, 100.0) << ',' << metrics::format_mean_std(r.hd)
                << ',' << metrics::format_mean_std(r.asd) << '\n';
    };
    for (const auto& r : eval.summary.rows) row(r);
    auto avg = eval.summary.average;
    avg.name = "Average";
    row(avg);

    std::ofstream per_case(dir / "per_case.csv", std::ios::trunc);
    per_case << "case,class,dice,hd_mm,asd_mm\n";
    for (const auto& c : eval.cases)
        for (std::size_t k = 0; k < c.classes.size(); ++k)
            if (c.classes[k].present)
                per_case << c.case_id << ',' << eval.class_names[k] << ',' << num(c.classes[k].dice) << ','
                         << num(c.classes[k].hd) << ',' << num(c.classes[k].asd) << '\n';
    if (!summary || !per_case) throw IoError("cannot write evaluation outputs to " + dir.string());
}

}  // namespace stationing::pipeline
