#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stationing/core/volume.hpp"

namespace stationing::metrics {

// Metrics for one class of one case. `present` is false when the class is
// absent from the reference; HD/ASD are NaN when either side is empty.
struct ClassMetrics {
    bool present = true;
    double dice = 0.0;
    double hd = std::numeric_limits<double>::quiet_NaN();
    double asd = std::numeric_limits<double>::quiet_NaN();
};

struct CaseMetrics {
    std::string case_id;
    std::vector<ClassMetrics> classes;  // index = label - 1
};

// Dice/HD/ASD for labels 1..class_names.size() of `predicted` vs `reference`.
CaseMetrics evaluate_case(const std::string& case_id, const LabelMap& predicted, const LabelMap& reference,
                          int class_count);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
    int n = 0;
};

struct SummaryRow {
    std::string name;
    bool absent = false;
    MeanStd dice;
    MeanStd hd;
    MeanStd asd;
};

struct MetricsReport {
    std::vector<SummaryRow> rows;  // one per class
    SummaryRow average;            // mean of class means, mean of class stds
};

MeanStd mean_std(const std::vector<double>& values);

// Per-class mean and population std across cases; classes absent from every
// case are flagged and left out of the Average row.
MetricsReport summarize(const std::vector<CaseMetrics>& cases, const std::vector<std::string>& class_names);

// "81.1 ± 6.1". Dice is rendered in percent, distances in mm.
std::string format_mean_std(const MeanStd& m, double scale = 1.0);

nlohmann::json to_json(const MetricsReport& report);
nlohmann::json to_json(const CaseMetrics& metrics);
CaseMetrics case_metrics_from_json(const nlohmann::json& j);

}  // namespace stationing::metrics
