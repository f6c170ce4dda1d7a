#include "stationing/numerics/loss.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "stationing/core/error.hpp"

namespace stationing::numerics {

template <typename T>
BasicTensor<T> dice_ce_loss(BasicGraph<T>& g, const BasicTensor<T>& probs, std::span<const std::uint8_t> target, int class_count,
                    const DiceCeOptions& options) {
    STATIONING_REQUIRE(probs.defined() && probs.rank() == 4, "dice_ce_loss expects [C,D,H,W] probabilities");
    STATIONING_REQUIRE(probs.dim(0) == class_count,
                       "dice_ce_loss: probs have " + std::to_string(probs.dim(0)) + " channels, expected " +
                           std::to_string(class_count));
    const std::int64_t N = probs.dim(1) * probs.dim(2) * probs.dim(3);
    STATIONING_REQUIRE(static_cast<std::int64_t>(target.size()) == N, "dice_ce_loss: target size mismatch");
    for (auto t : target)
        STATIONING_REQUIRE(t < class_count, "dice_ce_loss: target label " + std::to_string(t) + " out of range [0, " +
                                                std::to_string(class_count) + ")");

    const int C = class_count;
    const double eps = options.dice_smooth;
    const T* p = probs.data();

    // Per-class sums in fixed order: voxels x-fastest, then classes.
    auto inter = std::make_shared<std::vector<double>>(C, 0.0);
    auto psum = std::make_shared<std::vector<double>>(C, 0.0);
    auto ysum = std::make_shared<std::vector<double>>(C, 0.0);
    for (int c = 0; c < C; ++c) {
        const T* pc = p + c * N;
        double ps = 0.0, in = 0.0, ys = 0.0;
        for (std::int64_t j = 0; j < N; ++j) {
            ps += pc[j];
            if (target[j] == c) {
                in += pc[j];
                ys += 1.0;
            }
        }
        (*inter)[c] = in;
        (*psum)[c] = ps;
        (*ysum)[c] = ys;
    }
    double dice_mean = 0.0;
    for (int c = 0; c < C; ++c) dice_mean += (2.0 * (*inter)[c] + eps) / ((*psum)[c] + (*ysum)[c] + eps);
    dice_mean /= C;

    double ce = 0.0;
    for (std::int64_t j = 0; j < N; ++j) {
        const T pt = std::max(p[target[j] * N + j], static_cast<T>(options.prob_floor));
        ce -= std::log(static_cast<double>(pt));
    }
    ce /= static_cast<double>(N);

    const double total = options.dice_weight * (1.0 - dice_mean) + options.ce_weight * ce;
    BasicTensor<T> out = BasicTensor<T>::scalar(static_cast<T>(total));

    std::vector<std::uint8_t> labels(target.begin(), target.end());
    g.record(out, {probs}, [probs, out, labels = std::move(labels), inter, psum, ysum, C, N, eps, options]() mutable {
        const T d = out.grad()[0];
        const T* p = probs.data();
        T* dp = probs.grad().data();
        const double dice_scale = -options.dice_weight * d / C;
        for (int c = 0; c < C; ++c) {
            const double den = (*psum)[c] + (*ysum)[c] + eps;
            const double num = 2.0 * (*inter)[c] + eps;
            // d dice_c / d p_cj = (2 y_cj den - num) / den^2
            const T on = static_cast<T>(dice_scale * (2.0 * den - num) / (den * den));
            const T off = static_cast<T>(dice_scale * (-num) / (den * den));
            T* dpc = dp + c * N;
            for (std::int64_t j = 0; j < N; ++j) dpc[j] += labels[j] == c ? on : off;
        }
        const double ce_scale = options.ce_weight * d / static_cast<double>(N);
        for (std::int64_t j = 0; j < N; ++j) {
            const auto idx = labels[j] * N + j;
            if (p[idx] >= static_cast<T>(options.prob_floor)) dp[idx] -= static_cast<T>(ce_scale / p[idx]);
        }
    });
    return out;
}

template BasicTensor<float> dice_ce_loss(BasicGraph<float>&, const BasicTensor<float>&,
                                         std::span<const std::uint8_t>, int, const DiceCeOptions&);
template BasicTensor<double> dice_ce_loss(BasicGraph<double>&, const BasicTensor<double>&,
                                          std::span<const std::uint8_t>, int, const DiceCeOptions&);

}  // namespace stationing::numerics
