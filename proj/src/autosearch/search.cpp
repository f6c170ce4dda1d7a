#include "stationing/autosearch/search.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "stationing/core/error.hpp"
#include "stationing/numerics/ops.hpp"

namespace stationing::autosearch {

using numerics::Graph;
using numerics::Tensor;

std::vector<int> rank_channels(const std::vector<float>& phi) {
    std::vector<int> order(phi.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return phi[a] > phi[b]; });
    return order;
}

void validate(const SearchSchedule& s) {
    if (s.total_epochs < 0 || s.freeze_epochs < 0) throw ConfigError("search epochs must be non-negative");
    if (s.freeze_epochs > s.total_epochs) throw ConfigError("freeze epochs exceed total epochs");
    if (!(s.alpha_lr > 0)) throw ConfigError("alpha learning rate must be positive");
}

SearchResult search(const std::vector<pipeline::LnsItem>& items, const std::vector<std::string>& organ_names,
                    int station_classes, const pipeline::StageOptions& options, const SearchSchedule& schedule) {
    validate(schedule);
    STATIONING_REQUIRE(!items.empty(), "search needs at least one training case");
    const auto C = static_cast<std::int64_t>(organ_names.size());
    STATIONING_REQUIRE(C >= 1, "search needs at least one organ channel");
    for (const auto& it : items)
        STATIONING_REQUIRE(it.organs.defined() && it.organs.dim(0) == C,
                           "organ map of " + it.id + " does not cover the organ legend");

    std::vector<segnet::Sample> data;
    for (const auto& it : items) data.push_back({it.id, Tensor(), it.target});
    const auto& img = items.front().image;
    auto cfg = options.net;
    cfg.in_channels = 1 + static_cast<int>(C);
    cfg.classes = station_classes;
    cfg.extents = {static_cast<int>(img.dim(3)), static_cast<int>(img.dim(2)), static_cast<int>(img.dim(1))};

    SearchResult r;
    r.organ_names = organ_names;
    r.model = segnet::build_model(cfg);
    auto alpha = Tensor::zeros({C}, true);

    segnet::TrainHooks hooks;
    hooks.make_input = [&items, alpha](Graph& g, std::size_t i) {
        const auto phi = channel_weights(g, alpha);
        return numerics::concat_channels(g, items[i].image, apply_weights(g, items[i].organs, phi));
    };
    hooks.extra_params = {alpha};
    hooks.extra_lr = schedule.alpha_lr;
    const int freeze = schedule.freeze_epochs;
    hooks.extra_step = [freeze](int epoch, int batch) { return epoch >= freeze && batch % 2 == 1; };
    hooks.on_epoch_end = [&r, alpha](int) {
        r.alpha_history.emplace_back(alpha.values().begin(), alpha.values().end());
    };
    if (options.on_access) hooks.on_access = [&items, &options](std::size_t i) { options.on_access(items[i].id); };

    auto net = schedule.net;
    net.epochs = schedule.total_epochs;
    segnet::train(r.model, data, net, hooks);

    r.alpha.assign(alpha.values().begin(), alpha.values().end());
    r.phi = channel_weights(r.alpha);
    r.ranking = rank_channels(r.phi);
    return r;
}

std::vector<int> select_top_n(const std::vector<float>& phi, int n) {
    STATIONING_REQUIRE(n >= 1 && n <= static_cast<int>(phi.size()),
                       "top-n must lie in [1, " + std::to_string(phi.size()) + "], got " + std::to_string(n));
    auto order = rank_channels(phi);
    order.resize(static_cast<std::size_t>(n));
    std::sort(order.begin(), order.end());
    return order;
}

std::vector<int> select_top_n(const SearchResult& result, int n) { return select_top_n(result.phi, n); }

nlohmann::json to_json(const SearchResult& r, const std::vector<int>& selected) {
    nlohmann::json ranking = nlohmann::json::array();
    for (std::size_t k = 0; k < r.ranking.size(); ++k) {
        const int id = r.ranking[k];
        ranking.push_back({{"rank", k + 1}, {"id", id}, {"organ", r.organ_names[id]}, {"phi", r.phi[id]}});
    }
    std::vector<std::string> names;
    for (int id : selected) names.push_back(r.organ_names[id]);
    return {{"organs", r.organ_names}, {"alpha", r.alpha},        {"phi", r.phi},
            {"ranking", ranking},      {"selected_ids", selected}, {"selected", names},
            {"alpha_history", r.alpha_history}};
}

void write_search_outputs(const SearchResult& r, const std::vector<int>& selected, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "search.json", std::ios::trunc);
        if (!out) throw IoError("cannot write " + (dir / "search.json").string());
        out << to_json(r, selected).dump(2) << '\n';
    }
    char buf[64];
    {
        std::ofstream out(dir / "ranking.csv", std::ios::trunc);
        out << "rank,id,organ,phi\n";
        for (std::size_t k = 0; k < r.ranking.size(); ++k) {
            const int id = r.ranking[k];
            std::snprintf(buf, sizeof buf, "%.9g", r.phi[id]);
            out << k + 1 << ',' << id << ',' << r.organ_names[id] << ',' << buf << '\n';
        }
    }
    {
        std::ofstream out(dir / "alpha_history.csv", std::ios::trunc);
        out << "epoch";
        for (const auto& n : r.organ_names) out << ',' << n;
        out << '\n';
        for (std::size_t e = 0; e < r.alpha_history.size(); ++e) {
            out << e;
            for (float a : r.alpha_history[e]) {
                std::snprintf(buf, sizeof buf, "%.9g", a);
                out << ',' << buf;
            }
            out << '\n';
        }
    }
}

}  // namespace stationing::autosearch
