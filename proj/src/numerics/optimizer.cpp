#include "stationing/numerics/optimizer.hpp"

#include <cmath>

#include "stationing/core/error.hpp"

namespace stationing::numerics {

Adam::Adam(std::vector<Tensor> params, AdamConfig config) : params_(std::move(params)), config_(config) {
    STATIONING_REQUIRE(config_.lr > 0.0f, "learning rate must be positive");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0f);
        v_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0f);
    }
}

void Adam::step() {
    ++steps_;
    const float b1 = config_.beta1, b2 = config_.beta2;
    const float c1 = static_cast<float>(1.0 - std::pow(static_cast<double>(b1), static_cast<double>(steps_)));
    const float c2 = static_cast<float>(1.0 - std::pow(static_cast<double>(b2), static_cast<double>(steps_)));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& p = params_[k];
        auto values = p.values();
        auto grads = p.grad();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < values.size(); ++i) {
            const float gi = grads[i];
            m[i] = b1 * m[i] + (1.0f - b1) * gi;
            v[i] = b2 * v[i] + (1.0f - b2) * gi * gi;
            const float mhat = m[i] / c1;
            const float vhat = v[i] / c2;
            values[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

}  // namespace stationing::numerics
