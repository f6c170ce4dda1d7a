#pragma once

#include <vector>

#include "stationing/numerics/graph.hpp"
#include "stationing/numerics/tensor.hpp"

namespace stationing::autosearch {

// One learnable logit per organ channel; phi = softmax(alpha).
struct ChannelWeights {
    std::vector<float> alpha;
    std::vector<float> phi() const;
};

ChannelWeights uniform_weights(int channels);

// Differentiable softmax over the logits ([C] -> [C]). Throws
// ContractViolation on an empty alpha.
numerics::Tensor channel_weights(numerics::Graph& g, const numerics::Tensor& alpha);
std::vector<float> channel_weights(const std::vector<float>& alpha);

// Channel c of the organ map [C, D, H, W] multiplied by phi[c].
numerics::Tensor apply_weights(numerics::Graph& g, const numerics::Tensor& organs, const numerics::Tensor& phi);
numerics::Tensor apply_weights(const numerics::Tensor& organs, const std::vector<float>& phi);

}  // namespace stationing::autosearch
