#pragma once

#include <cstdint>

#include "stationing/numerics/graph.hpp"
#include "stationing/numerics/tensor.hpp"

namespace stationing::numerics {

// Feature maps are channels-first [C, D, H, W] with W (x) fastest. All ops
// are instantiated for float and double.

// Cross-correlation with cubic odd kernel [Cout, Cin, k, k, k] plus bias [Cout].
template <typename T>
BasicTensor<T> conv3d(BasicGraph<T>& g, const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                      const BasicTensor<T>& bias, int stride, int padding);

// Nearest-neighbour upsampling by 2 along D, H, W.
template <typename T>
BasicTensor<T> upsample_nearest2(BasicGraph<T>& g, const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> concat_channels(BasicGraph<T>& g, const BasicTensor<T>& a, const BasicTensor<T>& b);

// Multiplies channel `channel` of x by the one-element tensor `scale`;
// other channels pass through.
template <typename T>
BasicTensor<T> scale_channel(BasicGraph<T>& g, const BasicTensor<T>& x, int channel, const BasicTensor<T>& scale);

// Multiplies channel c of x by weights[c] for every c.
template <typename T>
BasicTensor<T> scale_channels(BasicGraph<T>& g, const BasicTensor<T>& x, const BasicTensor<T>& weights);

template <typename T>
BasicTensor<T> leaky_relu(BasicGraph<T>& g, const BasicTensor<T>& x, T slope = T(0.01));

// Per-channel normalization over the spatial extents, then affine gamma/beta [C].
template <typename T>
BasicTensor<T> instance_norm(BasicGraph<T>& g, const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                             const BasicTensor<T>& beta, T eps = T(1e-5));

// Max-subtracted softmax along `axis`.
template <typename T>
BasicTensor<T> softmax(BasicGraph<T>& g, const BasicTensor<T>& x, int axis);

template <typename T>
BasicTensor<T> sum(BasicGraph<T>& g, const BasicTensor<T>& x);

// <x, constant>; the constant receives no gradient.
template <typename T>
BasicTensor<T> dot(BasicGraph<T>& g, const BasicTensor<T>& x, const BasicTensor<T>& constant);

}  // namespace stationing::numerics
