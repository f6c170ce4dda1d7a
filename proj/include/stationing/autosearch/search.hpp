#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stationing/autosearch/weights.hpp"
#include "stationing/pipeline/cascade.hpp"
#include "stationing/segnet/segnet.hpp"

namespace stationing::autosearch {

// Network weights alone are trained for the first `freeze_epochs`; after
// that batches alternate: even batch -> network step, odd batch -> alpha
// step. The network follows `net` (lr, decay, shuffle seed); alpha uses a
// constant learning rate.
struct SearchSchedule {
    int total_epochs = 100;
    int freeze_epochs = 20;
    float alpha_lr = 1e-2f;
    segnet::TrainSchedule net;
};

struct SearchResult {
    std::vector<std::string> organ_names;
    std::vector<float> alpha;
    std::vector<float> phi;
    std::vector<std::vector<float>> alpha_history;  // one entry per epoch, taken after the epoch
    std::vector<int> ranking;                       // organ ids by descending phi
    segnet::Model model;
};

// Descending phi; ties keep legend order.
std::vector<int> rank_channels(const std::vector<float>& phi);

// Throws ConfigError when freeze_epochs > total_epochs or epochs < 0.
void validate(const SearchSchedule& schedule);

// Joint training of alpha and the stage-L network on [X, F(organs, phi)].
// Every item must carry organ channels. Throws NumericError on a
// non-finite loss or alpha gradient.
SearchResult search(const std::vector<pipeline::LnsItem>& items, const std::vector<std::string>& organ_names,
                    int station_classes, const pipeline::StageOptions& options, const SearchSchedule& schedule);

// The n highest-phi organ ids, returned in legend order. Ties at the cut go
// to the lower legend index. Throws ContractViolation unless 1 <= n <= C.
std::vector<int> select_top_n(const SearchResult& result, int n);
std::vector<int> select_top_n(const std::vector<float>& phi, int n);

nlohmann::json to_json(const SearchResult& result, const std::vector<int>& selected);
void write_search_outputs(const SearchResult& result, const std::vector<int>& selected,
                          const std::filesystem::path& dir);

}  // namespace stationing::autosearch
