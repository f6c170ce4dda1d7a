#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stationing/autosearch/weights.hpp"
#include "stationing/phantom/phantom.hpp"
#include "stationing/segnet/segnet.hpp"

namespace stationing::pipeline {

using numerics::Tensor;
using phantom::CaseRecord;
using segnet::Model;

struct OrganLayout {
    int anchors = 0;
    int nonanchors = 0;
    std::vector<std::string> names;  // anchors first, label order
    int total() const { return anchors + nonanchors; }
};

// Throws ConfigError when anchors are not listed first.
OrganLayout organ_layout(const std::vector<phantom::OrganInfo>& legend);

// Channels for labels first .. first + count - 1 of `labels`.
Tensor one_hot(const LabelMap& labels, int first, int count);
// Drops channel 0 (background).
Tensor foreground_channels(const Tensor& probs);
Tensor concat(const Tensor& a, const Tensor& b);
Tensor select_channels(const Tensor& x, const std::vector<int>& channels);

// Network shape, schedule and the training-access callback of one stage.
// in_channels, classes and extents of `net` are filled in by each stage.
struct StageOptions {
    segnet::NetConfig net;
    segnet::TrainSchedule schedule;
    std::function<void(const std::string&)> on_access;
};

// Stage A: image -> background + anchors. Non-anchor voxels are background.
Model train_anchor(const std::vector<const CaseRecord*>& cases, const StageOptions& options);

// Stage B input: [X, anchor foreground probabilities from inference].
Tensor nonanchor_input(const CaseRecord& c, const Model& anchor, bool zero_anchor_channels = false);
// Stage B: background + non-anchors (relabelled 1..N). Throws ConfigError
// when the anchor model's class count disagrees with the legend.
Model train_nonanchor(const std::vector<const CaseRecord*>& cases, const Model& anchor, const StageOptions& options);

// Drops both background channels and concatenates anchors first. Values
// are copied unchanged.
Tensor fuse_organ_predictions(const Tensor& anchor_probs, const Tensor& nonanchor_probs);

struct OrganPrediction {
    Tensor anchor_probs;     // [1 + A, ...]
    Tensor nonanchor_probs;  // [1 + N, ...]
    Tensor fused;            // [A + N, ...]
    LabelMap labels;         // hard organ labels in the cohort legend
};

// Hard labels take the non-anchor argmax where it is foreground, else the
// anchor argmax (non-anchors are painted last in the phantom as well).
OrganPrediction predict_organs(const Model& anchor, const Model& nonanchor, const CaseRecord& c,
                               bool zero_anchor_channels = false);

// Joint baseline: image -> background + all organs in one model.
Model train_joint(const std::vector<const CaseRecord*>& cases, const StageOptions& options);

// One stage-L example: image [1, ...], organ channels (undefined for the
// CT-only arm) and the station target.
struct LnsItem {
    std::string id;
    Tensor image;
    Tensor organs;
    std::vector<std::uint8_t> target;
};

// [X] or [X, organs] or [X, F(organs, phi)].
Tensor lns_input(const LnsItem& item, const std::optional<autosearch::ChannelWeights>& weights = std::nullopt);

// Stage L. With weights the organ channels are scaled by softmax(alpha)
// inside the training graph. Throws ConfigError on weight arity mismatch.
Model train_lns(const std::vector<LnsItem>& items, int station_classes, const StageOptions& options,
                const std::optional<autosearch::ChannelWeights>& weights = std::nullopt);

LabelMap predict_stations(const Model& model, const LnsItem& item, const Spacing& spacing,
                          const std::optional<autosearch::ChannelWeights>& weights = std::nullopt);

}  // namespace stationing::pipeline
