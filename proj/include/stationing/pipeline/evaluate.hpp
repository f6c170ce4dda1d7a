#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stationing/metrics/summary.hpp"
#include "stationing/metrics/zones.hpp"

namespace stationing::pipeline {

struct EvalOutput {
    std::vector<std::string> class_names;
    std::vector<metrics::CaseMetrics> cases;
    metrics::MetricsReport summary;
    int zone_correct = 0;
    int zone_total = 0;  // 0 when no reference case carries LN instances
};

// Scores every case directory under `gt_dir` against the directory with the
// same name under `pred_dir` (station maps, see phantom::load_station_map).
// Zone accuracy uses `zones` when given, else the name-prefix map of the
// legend when it has one. Throws ConfigError naming the classes when the
// legends differ and IoError when a prediction is missing.
EvalOutput evaluate_directories(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                                const metrics::ZoneMap* zones = nullptr);

// eval.json, summary.csv (class,dice,hd_mm,asd_mm) and per_case.csv.
void write_eval_outputs(const EvalOutput& eval, const std::filesystem::path& dir);

}  // namespace stationing::pipeline
