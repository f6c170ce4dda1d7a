#include "stationing/autosearch/weights.hpp"

#include "stationing/core/error.hpp"
#include "stationing/numerics/ops.hpp"

namespace stationing::autosearch {

using numerics::Graph;
using numerics::Tensor;

std::vector<float> ChannelWeights::phi() const { return channel_weights(alpha); }

ChannelWeights uniform_weights(int channels) {
    STATIONING_REQUIRE(channels >= 1, "need at least one channel");
    return {std::vector<float>(static_cast<std::size_t>(channels), 0.0f)};
}

Tensor channel_weights(Graph& g, const Tensor& alpha) {
    STATIONING_REQUIRE(alpha.defined() && alpha.numel() >= 1, "channel weights need at least one logit");
    STATIONING_REQUIRE(alpha.rank() == 1, "channel logits must be a vector");
    return numerics::softmax(g, alpha, 0);
}

std::vector<float> channel_weights(const std::vector<float>& alpha) {
    STATIONING_REQUIRE(!alpha.empty(), "channel weights need at least one logit");
    Graph g;
    const auto phi = channel_weights(g, Tensor::from({static_cast<std::int64_t>(alpha.size())}, alpha));
    return {phi.values().begin(), phi.values().end()};
}

Tensor apply_weights(Graph& g, const Tensor& organs, const Tensor& phi) {
    STATIONING_REQUIRE(organs.rank() == 4, "organ map must be [C, D, H, W]");
    STATIONING_REQUIRE(phi.rank() == 1 && phi.dim(0) == organs.dim(0),
                       "weight arity " + std::to_string(phi.numel()) + " does not match " +
                           std::to_string(organs.dim(0)) + " organ channels");
    return numerics::scale_channels(g, organs, phi);
}

Tensor apply_weights(const Tensor& organs, const std::vector<float>& phi) {
    Graph g;
    return apply_weights(g, organs, Tensor::from({static_cast<std::int64_t>(phi.size())}, phi)).detached();
}

}  // namespace stationing::autosearch
