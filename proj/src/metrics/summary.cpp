#include "stationing/metrics/summary.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "stationing/core/error.hpp"
#include "stationing/metrics/mask.hpp"
#include "stationing/metrics/overlap.hpp"

namespace stationing::metrics {

CaseMetrics evaluate_case(const std::string& case_id, const LabelMap& predicted, const LabelMap& reference,
                          int class_count) {
    STATIONING_REQUIRE(predicted.extents == reference.extents, "prediction and reference extents differ");
    CaseMetrics out;
    out.case_id = case_id;
    for (int c = 1; c <= class_count; ++c) {
        const auto label = static_cast<std::uint8_t>(c);
        auto p = BinaryMask::from_labels(predicted, label);
        auto r = BinaryMask::from_labels(reference, label);
        r.spacing = p.spacing = reference.spacing;
        ClassMetrics m;
        m.present = !r.empty();
        m.dice = dice(p, r);
        if (!p.empty() && !r.empty()) {
            const auto d = surface_distances(p, r);
            double hd = 0.0, total = 0.0;
            for (double v : d.a_to_b) {
                hd = std::max(hd, v);
                total += v;
            }
            for (double v : d.b_to_a) {
                hd = std::max(hd, v);
                total += v;
            }
            m.hd = hd;
            m.asd = total / static_cast<double>(d.a_to_b.size() + d.b_to_a.size());
        }
        out.classes.push_back(m);
    }
    return out;
}

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd m;
    m.n = static_cast<int>(values.size());
    if (values.empty()) return m;
    double s = 0.0;
    for (double v : values) s += v;
    m.mean = s / m.n;
    double var = 0.0;
    for (double v : values) var += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(var / m.n);
    return m;
}

MetricsReport summarize(const std::vector<CaseMetrics>& cases, const std::vector<std::string>& class_names) {
    STATIONING_REQUIRE(!cases.empty(), "summarize needs at least one case");
    MetricsReport report;
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        std::vector<double> dsc, hd, asd_values;
        for (const auto& cm : cases) {
            STATIONING_REQUIRE(cm.classes.size() == class_names.size(), "case " + cm.case_id + " has wrong class count");
            const auto& m = cm.classes[c];
            if (!m.present) continue;
            dsc.push_back(m.dice);
            if (!std::isnan(m.hd)) hd.push_back(m.hd);
            if (!std::isnan(m.asd)) asd_values.push_back(m.asd);
        }
        SummaryRow row;
        row.name = class_names[c];
        row.absent = dsc.empty();
        row.dice = mean_std(dsc);
        row.hd = mean_std(hd);
        row.asd = mean_std(asd_values);
        report.rows.push_back(row);
    }
    report.average.name = "Average";
    auto average_of = [&](auto member) {
        MeanStd avg;
        for (const auto& row : report.rows) {
            const MeanStd& m = row.*member;
            if (row.absent || m.n == 0) continue;
            avg.mean += m.mean;
            avg.std += m.std;
            ++avg.n;
        }
        if (avg.n > 0) {
            avg.mean /= avg.n;
            avg.std /= avg.n;
        }
        return avg;
    };
    report.average.dice = average_of(&SummaryRow::dice);
    report.average.hd = average_of(&SummaryRow::hd);
    report.average.asd = average_of(&SummaryRow::asd);
    report.average.absent = report.average.dice.n == 0;
    return report;
}

std::string format_mean_std(const MeanStd& m, double scale) {
    if (m.n == 0) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f ± %.1f", m.mean * scale, m.std * scale);
    return buf;
}

namespace {

nlohmann::json ms_json(const MeanStd& m) {
    return {{"mean", m.mean}, {"std", m.std}, {"n", m.n}};
}

nlohmann::json row_json(const SummaryRow& r) {
    return {{"name", r.name},
            {"absent", r.absent},
            {"dice", ms_json(r.dice)},
            {"hd_mm", ms_json(r.hd)},
            {"asd_mm", ms_json(r.asd)},
            {"dice_text", format_mean_std(r.dice, 100.0)},
            {"hd_text", format_mean_std(r.hd)},
            {"asd_text", format_mean_std(r.asd)}};
}

nlohmann::json nan_to_null(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

}  // namespace

nlohmann::json to_json(const MetricsReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows) rows.push_back(row_json(r));
    return {{"rows", rows}, {"average", row_json(report.average)}};
}

nlohmann::json to_json(const CaseMetrics& metrics) {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& m : metrics.classes)
        classes.push_back({{"present", m.present}, {"dice", m.dice}, {"hd_mm", nan_to_null(m.hd)}, {"asd_mm", nan_to_null(m.asd)}});
    return {{"case", metrics.case_id}, {"classes", classes}};
}

CaseMetrics case_metrics_from_json(const nlohmann::json& j) {
    auto num = [](const nlohmann::json& v) {
        return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    };
    CaseMetrics m;
    m.case_id = j.at("case").get<std::string>();
    for (const auto& c : j.at("classes"))
        m.classes.push_back({c.at("present").get<bool>(), c.at("dice").get<double>(), num(c.at("hd_mm")), num(c.at("asd_mm"))});
    return m;
}

}  // namespace stationing::metrics
