#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <vector>

#include "stationing/core/error.hpp"
#include "stationing/numerics/tensor.hpp"

namespace stationing::numerics {

// Tape of differentiable operations in execution order. Operands of node i
// are leaves or outputs of nodes < i, so a reverse sweep is a valid
// topological order for backpropagation.
template <typename T>
class BasicGraph {
public:
    using TensorT = BasicTensor<T>;

    struct Node {
        TensorT output;
        std::vector<TensorT> operands;
        std::function<void()> backward;
    };

    // Records `output` only when some operand requires a gradient; returns
    // whether the node was recorded (and marks `output` as requiring grad).
    bool record(TensorT& output, std::vector<TensorT> operands, std::function<void()> backward) {
        const bool needed = std::any_of(operands.begin(), operands.end(),
                                        [](const TensorT& t) { return t.defined() && t.requires_grad(); });
        if (!needed) return false;
        output.set_requires_grad(true);
        nodes_.push_back(Node{output, std::move(operands), std::move(backward)});
        return true;
    }

    // Seeds d(loss)/d(loss) = 1 and runs every recorded backward rule in
    // reverse. Gradients accumulate into leaves; zero parameter gradients
    // between steps.
    void backward(TensorT& loss) {
        STATIONING_REQUIRE(loss.defined() && loss.numel() == 1,
                           "backward() needs a scalar loss, got shape " +
                               (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
        STATIONING_REQUIRE(loss.requires_grad(), "loss was not produced by a recorded graph");
        for (auto& node : nodes_) node.output.zero_grad();
        loss.grad()[0] = T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
    }

    std::size_t size() const noexcept { return nodes_.size(); }
    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    void clear() { nodes_.clear(); }

private:
    std::vector<Node> nodes_;
};

using Graph = BasicGraph<float>;
using GraphD = BasicGraph<double>;

}  // namespace stationing::numerics
