#pragma once

#include <cstdint>
#include <span>

#include "stationing/numerics/graph.hpp"
#include "stationing/numerics/tensor.hpp"

namespace stationing::numerics {

struct DiceCeOptions {
    double dice_smooth = 1.0;
    double dice_weight = 1.0;
    double ce_weight = 1.0;
    // Lower clamp on probabilities inside the log.
    double prob_floor = 1e-20;
};

// (1 - mean_c softDice_c) + mean_voxels(-log p_target), with
// softDice_c = (2 sum p_c y_c + eps) / (sum p_c + sum y_c + eps).
// `probs` is [C, D, H, W] summing to one along C; `target` holds one label
// per voxel in x-fastest order.
template <typename T>
BasicTensor<T> dice_ce_loss(BasicGraph<T>& g, const BasicTensor<T>& probs, std::span<const std::uint8_t> target,
                            int class_count, const DiceCeOptions& options = {});

}  // namespace stationing::numerics
