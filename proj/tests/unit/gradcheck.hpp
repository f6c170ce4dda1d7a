#pragma once

// Test-only central finite-difference checker. Runs in double precision so
// the tolerance reflects the backward rules, not float32 rounding.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "stationing/core/rng.hpp"
#include "stationing/numerics/graph.hpp"
#include "stationing/numerics/tensor.hpp"

namespace gradcheck {

using stationing::numerics::GraphD;
using stationing::numerics::Shape;
using stationing::numerics::TensorD;

inline TensorD random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0,
                             bool requires_grad = true) {
    stationing::CounterRng rng(seed);
    auto t = TensorD::zeros(std::move(shape), requires_grad);
    auto v = t.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = rng.uniform(i, lo, hi);
    return t;
}

struct Result {
    double worst_excess = 0.0;  // max over coords of |a - n| - tol(a, n); <= 0 means pass
    std::string worst;
    int checked = 0;
    bool ok() const { return worst_excess <= 0.0; }
};

// `loss` builds a fresh graph over `params` and returns the scalar loss.
inline Result check(const std::function<TensorD(GraphD&)>& loss, std::vector<TensorD> params, double h = 1e-3,
                    double rel = 1e-4, double abs_floor = 1e-6) {
    for (auto& p : params) p.zero_grad();
    {
        GraphD g;
        auto l = loss(g);
        g.backward(l);
    }
    std::vector<std::vector<double>> analytic;
    for (auto& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());

    Result r;
    r.worst_excess = -1.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto v = params[k].values();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double orig = v[i];
            v[i] = orig + h;
            double up, down;
            {
                GraphD g;
                up = loss(g).item();
            }
            v[i] = orig - h;
            {
                GraphD g;
                down = loss(g).item();
            }
            v[i] = orig;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[k][i];
            const double tol = std::max(abs_floor, rel * std::max(std::abs(a), std::abs(numeric)));
            const double excess = std::abs(a - numeric) - tol;
            ++r.checked;
            if (excess > r.worst_excess) {
                r.worst_excess = excess;
                r.worst = "param " + std::to_string(k) + " coord " + std::to_string(i) + ": analytic " +
                          std::to_string(a) + " numeric " + std::to_string(numeric);
            }
        }
    }
    return r;
}

}  // namespace gradcheck
