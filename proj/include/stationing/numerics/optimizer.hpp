#pragma once

#include <cstdint>
#include <vector>

#include "stationing/numerics/tensor.hpp"

namespace stationing::numerics {

struct AdamConfig {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

// Adaptive-moment optimizer over a fixed parameter list.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig config);

    // One update from the parameters' current gradients; parameters without
    // a gradient buffer are treated as having zero gradient.
    void step();
    void zero_grad();

    void set_lr(float lr) noexcept { config_.lr = lr; }
    float lr() const noexcept { return config_.lr; }
    std::int64_t step_count() const noexcept { return steps_; }
    const std::vector<std::vector<float>>& first_moments() const noexcept { return m_; }
    const std::vector<std::vector<float>>& second_moments() const noexcept { return v_; }
    const std::vector<Tensor>& params() const noexcept { return params_; }

private:
    std::vector<Tensor> params_;
    AdamConfig config_;
    std::vector<std::vector<float>> m_;
    std::vector<std::vector<float>> v_;
    std::int64_t steps_ = 0;
};

}  // namespace stationing::numerics
