#include "stationing/pipeline/folds.hpp"

#include <algorithm>

#include "stationing/core/error.hpp"
#include "stationing/core/rng.hpp"

namespace stationing::pipeline {

FoldManifest make_folds(const std::vector<std::string>& ids, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("fold count must be at least 2");
    if (static_cast<int>(ids.size()) < k)
        throw ConfigError("cohort of " + std::to_string(ids.size()) + " cases is smaller than k = " + std::to_string(k));
    std::vector<std::string> order = ids;
    const CounterRng rng(derive_seed(seed, "folds"));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i, i)]);

    FoldManifest m;
    m.k = k;
    m.test.resize(k);
    m.train.resize(k);
    for (std::size_t i = 0; i < order.size(); ++i) m.test[i % k].push_back(order[i]);
    for (int f = 0; f < k; ++f) {
        std::sort(m.test[f].begin(), m.test[f].end());
        for (int g = 0; g < k; ++g)
            if (g != f) m.train[f].insert(m.train[f].end(), m.test[g].begin(), m.test[g].end());
        std::sort(m.train[f].begin(), m.train[f].end());
    }
    return m;
}

void check_manifest(const FoldManifest& m, const std::vector<std::string>& ids) {
    STATIONING_REQUIRE(static_cast<int>(m.train.size()) == m.k && static_cast<int>(m.test.size()) == m.k,
                       "manifest fold count mismatch");
    std::multiset<std::string> seen;
    for (int f = 0; f < m.k; ++f) {
        const std::set<std::string> test(m.test[f].begin(), m.test[f].end());
        for (const auto& id : m.train[f])
            if (test.count(id)) throw LeakageError("fold " + std::to_string(f) + ": case " + id + " is in both train and test");
        seen.insert(m.test[f].begin(), m.test[f].end());
    }
    const std::multiset<std::string> all(ids.begin(), ids.end());
    STATIONING_REQUIRE(seen == all, "test folds do not partition the cohort");
}

nlohmann::json to_json(const FoldManifest& m) {
    nlohmann::json folds = nlohmann::json::array();
    for (int f = 0; f < m.k; ++f) folds.push_back({{"fold", f}, {"train", m.train[f]}, {"test", m.test[f]}});
    return {{"k", m.k}, {"folds", folds}};
}

void AccessLog::record(int fold, const std::string& stage, const std::string& case_id) {
    std::lock_guard lock(mutex_);
    log_[fold][stage].insert(case_id);
}

void AccessLog::check(const FoldManifest& manifest) const {
    std::lock_guard lock(mutex_);
    for (const auto& [fold, stages] : log_) {
        STATIONING_REQUIRE(fold >= 0 && fold < manifest.k, "access log names an unknown fold");
        const std::set<std::string> test(manifest.test[fold].begin(), manifest.test[fold].end());
        for (const auto& [stage, ids] : stages)
            for (const auto& id : ids)
                if (test.count(id))
                    throw LeakageError("fold " + std::to_string(fold) + ", stage " + stage + " read test case " + id);
    }
}

std::set<std::string> AccessLog::touched(int fold) const {
    std::lock_guard lock(mutex_);
    std::set<std::string> out;
    const auto it = log_.find(fold);
    if (it != log_.end())
        for (const auto& [stage, ids] : it->second) out.insert(ids.begin(), ids.end());
    return out;
}

std::vector<std::string> AccessLog::stage_cases(int fold, const std::string& stage) const {
    std::lock_guard lock(mutex_);
    const auto it = log_.find(fold);
    if (it == log_.end()) return {};
    const auto st = it->second.find(stage);
    if (st == it->second.end()) return {};
    return {st->second.begin(), st->second.end()};
}

}  // namespace stationing::pipeline
