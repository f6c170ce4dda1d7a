#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace stationing::pipeline {

// Case-level k-fold partition.
struct FoldManifest {
    int k = 4;
    std::vector<std::vector<std::string>> train;
    std::vector<std::vector<std::string>> test;
};

// Shuffles ids with `seed` and deals them into k test folds whose sizes
// differ by at most one. Throws ConfigError when the cohort is smaller than k.
FoldManifest make_folds(const std::vector<std::string>& ids, int k, std::uint64_t seed);

// Throws LeakageError when a fold's train and test sets intersect, and
// ContractViolation when the test folds do not partition `ids`.
void check_manifest(const FoldManifest& manifest, const std::vector<std::string>& ids);

nlohmann::json to_json(const FoldManifest& manifest);

// Records every case id read by a training stage so leakage can be asserted
// after the fact. Safe to share between fold jobs.
class AccessLog {
public:
    void record(int fold, const std::string& stage, const std::string& case_id);
    // Throws LeakageError naming fold, stage and case when a test case of
    // `fold` was read by one of that fold's training stages.
    void check(const FoldManifest& manifest) const;
    std::set<std::string> touched(int fold) const;
    std::vector<std::string> stage_cases(int fold, const std::string& stage) const;

private:
    mutable std::mutex mutex_;
    std::map<int, std::map<std::string, std::set<std::string>>> log_;
};

}  // namespace stationing::pipeline
