#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stationing/core/volume.hpp"
#include "stationing/numerics/graph.hpp"
#include "stationing/numerics/tensor.hpp"

namespace stationing::segnet {

using numerics::Graph;
using numerics::Tensor;

// Encoder-decoder layout, widths w_l = base_width * 2^l:
//   block(a, b)      = conv3x3x3(a -> b) + instance norm (affine) + leaky ReLU
//   encoder level 0  = block(Cin, w0), block(w0, w0)
//   encoder level l  = block(w_{l-1}, w_l) with stride 2, block(w_l, w_l)
//   decoder level l  = upsample x2, concat [skip_l, up], block(w_l + w_{l+1}, w_l), block(w_l, w_l)
//   head             = conv1x1x1(w0 -> C), softmax over channels
// Each block holds kernel, bias, gamma, beta: 27ab + 3b scalars.
struct NetConfig {
    int in_channels = 1;
    int classes = 2;
    int depth = 3;
    int base_width = 8;
    Extents extents{64, 64, 32};
    std::uint64_t seed = 0;
};

// Throws ConfigError for depth < 2, fewer than two classes, no input
// channels or extents not divisible by 2^(depth - 1).
void validate(const NetConfig& config);

std::vector<numerics::Shape> parameter_shapes(const NetConfig& config);
std::int64_t parameter_count(const NetConfig& config);

struct Model {
    NetConfig config;
    std::vector<Tensor> params;
    std::vector<double> loss_log;  // mean loss per epoch
};

// Fan-in scaled Gaussian kernels, zero biases, unit gammas, zero betas.
Model build_model(const NetConfig& config);

// Differentiable forward pass on [Cin, D, H, W]; returns [C, D, H, W]
// probabilities. Instantiated for float and double.
template <typename T>
numerics::BasicTensor<T> forward(numerics::BasicGraph<T>& g, const NetConfig& config,
                                 const std::vector<numerics::BasicTensor<T>>& params,
                                 const numerics::BasicTensor<T>& input);

// Inference without a retained graph.
Tensor predict_probs(const Model& model, const Tensor& input);

// Per-voxel argmax over channels, lowest class index on ties.
LabelMap argmax_labels(const Tensor& probs, const Spacing& spacing = {});
LabelMap predict_labels(const Model& model, const Tensor& input, const Spacing& spacing = {});

// Volume [D, H, W] -> tensor [1, D, H, W].
Tensor image_tensor(const Volume& image);

struct Sample {
    std::string id;
    Tensor input;  // [Cin, D, H, W]
    std::vector<std::uint8_t> target;
};

struct TrainSchedule {
    int epochs = 60;
    float lr = 1e-3f;
    double decay_at = 0.75;  // fraction of epochs after which lr is multiplied by decay
    float decay = 0.1f;
    std::uint64_t seed = 0;
};

// Extension points used by the channel search; all optional.
struct TrainHooks {
    // Builds the network input for sample i inside the step's graph.
    std::function<Tensor(Graph&, std::size_t)> make_input;
    // Extra parameters with their own optimizer (constant lr).
    std::vector<Tensor> extra_params;
    float extra_lr = 1e-2f;
    // true -> this batch updates extra_params instead of the network.
    std::function<bool(int epoch, int batch)> extra_step;
    std::function<void(int epoch)> on_epoch_end;
    // Called with the sample index before it is read.
    std::function<void(std::size_t)> on_access;
};

// Batch size one over full volumes, order shuffled per epoch from
// schedule.seed. Appends one mean loss per epoch to model.loss_log.
// Throws NumericError naming epoch and case on a non-finite loss or gradient.
void train(Model& model, const std::vector<Sample>& data, const TrainSchedule& schedule,
           const TrainHooks& hooks = {});

// Shuffled order for one epoch (Fisher-Yates on the counter generator).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);
void write_loss_log(const Model& model, const std::filesystem::path& path);

nlohmann::json to_json(const NetConfig& config);
NetConfig net_config_from_json(const nlohmann::json& j, NetConfig base = {});

}  // namespace stationing::segnet
