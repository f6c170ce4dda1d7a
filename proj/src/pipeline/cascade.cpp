#include "stationing/pipeline/cascade.hpp"

#include <algorithm>

#include "stationing/core/error.hpp"
#include "stationing/numerics/ops.hpp"

namespace stationing::pipeline {

using numerics::Graph;

namespace {

int channel_count(const Tensor& t) { return static_cast<int>(t.dim(0)); }

std::vector<std::uint8_t> remap(const LabelMap& labels, int first, int count) {
    std::vector<std::uint8_t> out(labels.data.size(), 0);
    for (std::size_t v = 0; v < out.size(); ++v) {
        const int l = labels.data[v];
        if (l >= first && l < first + count) out[v] = static_cast<std::uint8_t>(l - first + 1);
    }
    return out;
}

segnet::NetConfig stage_config(const StageOptions& o, int in, int classes, const Extents& e) {
    auto c = o.net;
    c.in_channels = in;
    c.classes = classes;
    c.extents = e;
    return c;
}

segnet::TrainHooks access_hooks(const std::vector<std::string>& ids, const StageOptions& o) {
    segnet::TrainHooks h;
    if (o.on_access) h.on_access = [&ids, &o](std::size_t i) { o.on_access(ids[i]); };
    return h;
}

void require_cases(const std::vector<const CaseRecord*>& cases) {
    STATIONING_REQUIRE(!cases.empty(), "stage needs at least one training case");
    for (const auto* c : cases) {
        STATIONING_REQUIRE(c != nullptr, "null case");
        STATIONING_REQUIRE(c->organ_legend == cases.front()->organ_legend, "cases disagree on the organ legend");
        STATIONING_REQUIRE(c->image.extents == cases.front()->image.extents, "cases disagree on the grid");
    }
}

}  // namespace

OrganLayout organ_layout(const std::vector<phantom::OrganInfo>& legend) {
    OrganLayout l;
    for (const auto& o : legend) {
        if (o.anchor && l.nonanchors) throw ConfigError("anchor organ '" + o.name + "' listed after a non-anchor");
        (o.anchor ? l.anchors : l.nonanchors)++;
        l.names.push_back(o.name);
    }
    if (!l.anchors || !l.nonanchors) throw ConfigError("legend needs anchor and non-anchor organs");
    return l;
}

Tensor one_hot(const LabelMap& labels, int first, int count) {
    const auto& e = labels.extents;
    const auto n = e.voxels();
    auto t = Tensor::zeros({count, e.z, e.y, e.x});
    auto v = t.values();
    for (std::size_t i = 0; i < n; ++i) {
        const int c = labels.data[i] - first;
        if (c >= 0 && c < count) v[c * n + i] = 1.0f;
    }
    return t;
}

Tensor foreground_channels(const Tensor& probs) {
    STATIONING_REQUIRE(probs.rank() == 4 && probs.dim(0) >= 2, "expected [C >= 2, D, H, W] probabilities");
    std::vector<int> ids(static_cast<std::size_t>(probs.dim(0) - 1));
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i) + 1;
    return select_channels(probs, ids);
}

Tensor concat(const Tensor& a, const Tensor& b) {
    Graph g;
    return numerics::concat_channels(g, a, b).detached();
}

Tensor select_channels(const Tensor& x, const std::vector<int>& channels) {
    STATIONING_REQUIRE(x.rank() == 4, "expected [C, D, H, W]");
    const auto n = static_cast<std::size_t>(x.dim(1) * x.dim(2) * x.dim(3));
    auto out = Tensor::zeros({static_cast<std::int64_t>(channels.size()), x.dim(1), x.dim(2), x.dim(3)});
    for (std::size_t k = 0; k < channels.size(); ++k) {
        STATIONING_REQUIRE(channels[k] >= 0 && channels[k] < x.dim(0), "channel index out of range");
        std::copy_n(x.values().begin() + channels[k] * n, n, out.values().begin() + k * n);
    }
    return out;
}

Model train_anchor(const std::vector<const CaseRecord*>& cases, const StageOptions& o) {
    require_cases(cases);
    const auto layout = organ_layout(cases.front()->organ_legend);
    std::vector<segnet::Sample> data;
    std::vector<std::string> ids;
    for (const auto* c : cases) {
        data.push_back({c->id, segnet::image_tensor(c->image), remap(c->organs, 1, layout.anchors)});
        ids.push_back(c->id);
    }
    auto m = segnet::build_model(stage_config(o, 1, 1 + layout.anchors, cases.front()->image.extents));
    segnet::train(m, data, o.schedule, access_hooks(ids, o));
    return m;
}

Tensor nonanchor_input(const CaseRecord& c, const Model& anchor, bool zero_anchor_channels) {
    const auto x = segnet::image_tensor(c.image);
    auto fg = foreground_channels(segnet::predict_probs(anchor, x));
    if (zero_anchor_channels) std::fill(fg.values().begin(), fg.values().end(), 0.0f);
    return concat(x, fg);
}

Model train_nonanchor(const std::vector<const CaseRecord*>& cases, const Model& anchor, const StageOptions& o) {
    require_cases(cases);
    const auto layout = organ_layout(cases.front()->organ_legend);
    if (anchor.config.classes != 1 + layout.anchors)
        throw ConfigError("anchor model predicts " + std::to_string(anchor.config.classes - 1) +
                          " organs but the legend has " + std::to_string(layout.anchors) + " anchors");
    std::vector<segnet::Sample> data;
    std::vector<std::string> ids;
    for (const auto* c : cases) {
        data.push_back({c->id, nonanchor_input(*c, anchor), remap(c->organs, 1 + layout.anchors, layout.nonanchors)});
        ids.push_back(c->id);
    }
    auto m = segnet::build_model(
        stage_config(o, 1 + layout.anchors, 1 + layout.nonanchors, cases.front()->image.extents));
    segnet::train(m, data, o.schedule, access_hooks(ids, o));
    return m;
}

Tensor fuse_organ_predictions(const Tensor& anchor_probs, const Tensor& nonanchor_probs) {
    STATIONING_REQUIRE(anchor_probs.rank() == 4 && nonanchor_probs.rank() == 4, "expected [C, D, H, W] inputs");
    STATIONING_REQUIRE(std::equal(anchor_probs.shape().begin() + 1, anchor_probs.shape().end(),
                                  nonanchor_probs.shape().begin() + 1),
                       "anchor and non-anchor maps have different extents");
    return concat(foreground_channels(anchor_probs), foreground_channels(nonanchor_probs));
}

OrganPrediction predict_organs(const Model& anchor, const Model& nonanchor, const CaseRecord& c,
                               bool zero_anchor_channels) {
    OrganPrediction p;
    const auto x = segnet::image_tensor(c.image);
    p.anchor_probs = segnet::predict_probs(anchor, x);
    auto fg = foreground_channels(p.anchor_probs);
    if (zero_anchor_channels) std::fill(fg.values().begin(), fg.values().end(), 0.0f);
    p.nonanchor_probs = segnet::predict_probs(nonanchor, concat(x, fg));
    p.fused = fuse_organ_predictions(p.anchor_probs, p.nonanchor_probs);
    const int anchors = channel_count(p.anchor_probs) - 1;
    const auto a = segnet::argmax_labels(p.anchor_probs, c.image.spacing);
    const auto b = segnet::argmax_labels(p.nonanchor_probs, c.image.spacing);
    p.labels = a;
    for (std::size_t v = 0; v < b.data.size(); ++v)
        if (b.data[v]) p.labels.data[v] = static_cast<std::uint8_t>(anchors + b.data[v]);
    return p;
}

Model train_joint(const std::vector<const CaseRecord*>& cases, const StageOptions& o) {
    require_cases(cases);
    const auto layout = organ_layout(cases.front()->organ_legend);
    std::vector<segnet::Sample> data;
    std::vector<std::string> ids;
    for (const auto* c : cases) {
        data.push_back({c->id, segnet::image_tensor(c->image), c->organs.data});
        ids.push_back(c->id);
    }
    auto m = segnet::build_model(stage_config(o, 1, 1 + layout.total(), cases.front()->image.extents));
    segnet::train(m, data, o.schedule, access_hooks(ids, o));
    return m;
}

Tensor lns_input(const LnsItem& item, const std::optional<autosearch::ChannelWeights>& weights) {
    if (!item.organs.defined()) {
        STATIONING_REQUIRE(!weights, "channel weights given without organ channels");
        return item.image;
    }
    if (!weights) return concat(item.image, item.organs);
    if (weights->alpha.size() != static_cast<std::size_t>(item.organs.dim(0)))
        throw ConfigError("weight arity " + std::to_string(weights->alpha.size()) + " does not match " +
                          std::to_string(item.organs.dim(0)) + " organ channels");
    return concat(item.image, autosearch::apply_weights(item.organs, weights->phi()));
}

Model train_lns(const std::vector<LnsItem>& items, int station_classes, const StageOptions& o,
                const std::optional<autosearch::ChannelWeights>& weights) {
    STATIONING_REQUIRE(!items.empty(), "stage L needs at least one training case");
    const bool with_organs = items.front().organs.defined();
    const int organ_channels = with_organs ? channel_count(items.front().organs) : 0;
    for (const auto& it : items) {
        STATIONING_REQUIRE(it.organs.defined() == with_organs, "items disagree on organ channels");
        if (with_organs)
            STATIONING_REQUIRE(channel_count(it.organs) == organ_channels, "items disagree on organ channel count");
    }
    if (weights && weights->alpha.size() != static_cast<std::size_t>(organ_channels))
        throw ConfigError("weight arity " + std::to_string(weights->alpha.size()) + " does not match " +
                          std::to_string(organ_channels) + " organ channels");

    std::vector<segnet::Sample> data;
    std::vector<std::string> ids;
    for (const auto& it : items) {
        // Weighted inputs are assembled inside the graph below.
        data.push_back({it.id, weights ? Tensor() : lns_input(it), it.target});
        ids.push_back(it.id);
    }
    const auto& img = items.front().image;
    const Extents e{static_cast<int>(img.dim(3)), static_cast<int>(img.dim(2)), static_cast<int>(img.dim(1))};
    auto m = segnet::build_model(stage_config(o, 1 + organ_channels, station_classes, e));
    auto hooks = access_hooks(ids, o);
    if (weights) {
        const auto alpha = Tensor::from({organ_channels}, weights->alpha);
        hooks.make_input = [&items, alpha](Graph& g, std::size_t i) {
            const auto phi = autosearch::channel_weights(g, alpha);
            return numerics::concat_channels(g, items[i].image, autosearch::apply_weights(g, items[i].organs, phi));
        };
    }
    segnet::train(m, data, o.schedule, hooks);
    return m;
}

LabelMap predict_stations(const Model& model, const LnsItem& item, const Spacing& spacing,
                          const std::optional<autosearch::ChannelWeights>& weights) {
    return segnet::predict_labels(model, lns_input(item, weights), spacing);
}

}  // namespace stationing::pipeline
