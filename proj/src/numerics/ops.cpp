#include "stationing/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "stationing/core/error.hpp"

namespace stationing::numerics {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

// Upper bound on im2col buffer size (Ts) per chunk of output planes.
constexpr std::int64_t kColumnBudget = std::int64_t{1} << 22;

struct ConvGeometry {
    int cin, d, h, w;
    int cout, k, stride, pad;
    int od, oh, ow;

    std::int64_t rows() const { return std::int64_t{cin} * k * k * k; }
    std::int64_t plane() const { return std::int64_t{oh} * ow; }
    std::int64_t out_voxels() const { return plane() * od; }
    bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }
};

template <typename T>
void accumulate(std::span<T> dst, std::span<const T> src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Fills the row-major [cin*k^3, planes*oh*ow] column matrix for output planes [oz0, oz1).
template <typename T>
void im2col(const T* in, const ConvGeometry& g, int oz0, int oz1, T* col) {
    const std::int64_t cols = std::int64_t{oz1 - oz0} * g.plane();
    std::int64_t row = 0;
    for (int ci = 0; ci < g.cin; ++ci) {
        const T* chan = in + std::int64_t{ci} * g.d * g.h * g.w;
        for (int kz = 0; kz < g.k; ++kz) {
            for (int ky = 0; ky < g.k; ++ky) {
                for (int kx = 0; kx < g.k; ++kx, ++row) {
                    T* dst = col + row * cols;
                    for (int oz = oz0; oz < oz1; ++oz) {
                        const int iz = oz * g.stride - g.pad + kz;
                        for (int oy = 0; oy < g.oh; ++oy, dst += g.ow) {
                            const int iy = oy * g.stride - g.pad + ky;
                            if (iz < 0 || iz >= g.d || iy < 0 || iy >= g.h) {
                                std::fill(dst, dst + g.ow, T(0));
                                continue;
                            }
                            const T* src = chan + (std::int64_t{iz} * g.h + iy) * g.w;
                            if (g.stride == 1) {
                                const int lo = std::max(0, g.pad - kx);
                                const int hi = std::min(g.ow, g.w + g.pad - kx);
                                std::fill(dst, dst + lo, T(0));
                                if (hi > lo) std::memcpy(dst + lo, src + lo - g.pad + kx, sizeof(T) * (hi - lo));
                                std::fill(dst + std::max(lo, hi), dst + g.ow, T(0));
                            } else {
                                for (int ox = 0; ox < g.ow; ++ox) {
                                    const int ix = ox * g.stride - g.pad + kx;
                                    dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : T(0);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatters-adds columns back into the input gradient.
template <typename T>
void col2im(const T* col, const ConvGeometry& g, int oz0, int oz1, T* din) {
    const std::int64_t cols = std::int64_t{oz1 - oz0} * g.plane();
    std::int64_t row = 0;
    for (int ci = 0; ci < g.cin; ++ci) {
        T* chan = din + std::int64_t{ci} * g.d * g.h * g.w;
        for (int kz = 0; kz < g.k; ++kz) {
            for (int ky = 0; ky < g.k; ++ky) {
                for (int kx = 0; kx < g.k; ++kx, ++row) {
                    const T* src = col + row * cols;
                    for (int oz = oz0; oz < oz1; ++oz) {
                        const int iz = oz * g.stride - g.pad + kz;
                        for (int oy = 0; oy < g.oh; ++oy, src += g.ow) {
                            const int iy = oy * g.stride - g.pad + ky;
                            if (iz < 0 || iz >= g.d || iy < 0 || iy >= g.h) continue;
                            T* dst = chan + (std::int64_t{iz} * g.h + iy) * g.w;
                            for (int ox = 0; ox < g.ow; ++ox) {
                                const int ix = ox * g.stride - g.pad + kx;
                                if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

int planes_per_chunk(const ConvGeometry& g) {
    const std::int64_t per_plane = g.rows() * g.plane();
    return static_cast<int>(std::clamp<std::int64_t>(kColumnBudget / std::max<std::int64_t>(per_plane, 1), 1, g.od));
}

template <typename T>
void require_feature_map(const BasicTensor<T>& t, const char* what) {
    STATIONING_REQUIRE(t.defined() && t.rank() == 4,
                       std::string(what) + " must be a [C,D,H,W] tensor, got " +
                           (t.defined() ? shape_string(t.shape()) : std::string("undefined")));
}

template <typename T>
std::int64_t spatial_size(const BasicTensor<T>& t) { return t.dim(1) * t.dim(2) * t.dim(3); }

}  // namespace

template <typename T>
BasicTensor<T> conv3d(BasicGraph<T>& g, const BasicTensor<T>& input, const BasicTensor<T>& kernel, const BasicTensor<T>& bias, int stride,
              int padding) {
    require_feature_map(input, "conv3d input");
    STATIONING_REQUIRE(kernel.defined() && kernel.rank() == 5, "conv3d kernel must be [Cout,Cin,k,k,k]");
    STATIONING_REQUIRE(stride >= 1 && padding >= 0, "conv3d needs stride >= 1 and padding >= 0");
    const int k = static_cast<int>(kernel.dim(2));
    STATIONING_REQUIRE(kernel.dim(3) == k && kernel.dim(4) == k && k % 2 == 1, "conv3d kernel must be cubic with odd size");
    STATIONING_REQUIRE(kernel.dim(1) == input.dim(0),
                       "conv3d channel mismatch: input has " + std::to_string(input.dim(0)) +
                           " channels, kernel expects " + std::to_string(kernel.dim(1)));
    STATIONING_REQUIRE(bias.defined() && bias.numel() == kernel.dim(0), "conv3d bias must have Cout entries");

    ConvGeometry geo{};
    geo.cin = static_cast<int>(input.dim(0));
    geo.d = static_cast<int>(input.dim(1));
    geo.h = static_cast<int>(input.dim(2));
    geo.w = static_cast<int>(input.dim(3));
    geo.cout = static_cast<int>(kernel.dim(0));
    geo.k = k;
    geo.stride = stride;
    geo.pad = padding;
    auto out_extent = [&](int n) { return (n + 2 * padding - k) / stride + 1; };
    STATIONING_REQUIRE(geo.d + 2 * padding >= k && geo.h + 2 * padding >= k && geo.w + 2 * padding >= k,
                       "conv3d output extent would be < 1");
    geo.od = out_extent(geo.d);
    geo.oh = out_extent(geo.h);
    geo.ow = out_extent(geo.w);

    BasicTensor<T> out = BasicTensor<T>::zeros({geo.cout, geo.od, geo.oh, geo.ow});
    const std::int64_t P = geo.out_voxels();
    const std::int64_t K = geo.rows();
    {
        T* o = out.data();
        const T* b = bias.data();
        for (int co = 0; co < geo.cout; ++co) std::fill(o + co * P, o + (co + 1) * P, b[co]);
    }
    const ConstStridedMap<T> weights(kernel.data(), geo.cout, K, Eigen::OuterStride<>(K));

    if (geo.pointwise()) {
        ConstStridedMap<T> in(input.data(), K, P, Eigen::OuterStride<>(P));
        StridedMap<T> o(out.data(), geo.cout, P, Eigen::OuterStride<>(P));
        o.noalias() += weights * in;
    } else {
        const int chunk = planes_per_chunk(geo);
        std::vector<T> col(static_cast<std::size_t>(K * chunk * geo.plane()));
        for (int oz0 = 0; oz0 < geo.od; oz0 += chunk) {
            const int oz1 = std::min(geo.od, oz0 + chunk);
            const std::int64_t cols = std::int64_t{oz1 - oz0} * geo.plane();
            im2col(input.data(), geo, oz0, oz1, col.data());
            ConstStridedMap<T> c(col.data(), K, cols, Eigen::OuterStride<>(cols));
            StridedMap<T> o(out.data() + oz0 * geo.plane(), geo.cout, cols, Eigen::OuterStride<>(P));
            o.noalias() += weights * c;
        }
    }

    g.record(out, {input, kernel, bias}, [input, kernel, bias, out, geo]() mutable {
        const std::int64_t P = geo.out_voxels();
        const std::int64_t K = geo.rows();
        const T* dout = out.grad().data();
        if (bias.requires_grad()) {
            auto db = bias.grad();
            for (int co = 0; co < geo.cout; ++co) {
                double s = 0.0;
                const T* row = dout + co * P;
                for (std::int64_t i = 0; i < P; ++i) s += row[i];
                db[co] += static_cast<T>(s);
            }
        }
        const bool want_w = kernel.requires_grad();
        const bool want_x = input.requires_grad();
        if (!want_w && !want_x) return;
        const ConstStridedMap<T> weights(kernel.data(), geo.cout, K, Eigen::OuterStride<>(K));
        if (geo.pointwise()) {
            ConstStridedMap<T> dO(dout, geo.cout, P, Eigen::OuterStride<>(P));
            if (want_w) {
                ConstStridedMap<T> in(input.data(), K, P, Eigen::OuterStride<>(P));
                StridedMap<T> dW(kernel.grad().data(), geo.cout, K, Eigen::OuterStride<>(K));
                dW.noalias() += dO * in.transpose();
            }
            if (want_x) {
                StridedMap<T> dI(input.grad().data(), K, P, Eigen::OuterStride<>(P));
                dI.noalias() += weights.transpose() * dO;
            }
            return;
        }
        const int chunk = planes_per_chunk(geo);
        std::vector<T> col(static_cast<std::size_t>(K * chunk * geo.plane()));
        T* din = want_x ? input.grad().data() : nullptr;
        T* dw = want_w ? kernel.grad().data() : nullptr;
        for (int oz0 = 0; oz0 < geo.od; oz0 += chunk) {
            const int oz1 = std::min(geo.od, oz0 + chunk);
            const std::int64_t cols = std::int64_t{oz1 - oz0} * geo.plane();
            ConstStridedMap<T> dO(dout + oz0 * geo.plane(), geo.cout, cols, Eigen::OuterStride<>(P));
            if (want_w) {
                im2col(input.data(), geo, oz0, oz1, col.data());
                ConstStridedMap<T> c(col.data(), K, cols, Eigen::OuterStride<>(cols));
                StridedMap<T> dW(dw, geo.cout, K, Eigen::OuterStride<>(K));
                dW.noalias() += dO * c.transpose();
            }
            if (want_x) {
                StridedMap<T> dc(col.data(), K, cols, Eigen::OuterStride<>(cols));
                dc.noalias() = weights.transpose() * dO;
                col2im(col.data(), geo, oz0, oz1, din);
            }
        }
    });
    return out;
}

template <typename T>
BasicTensor<T> upsample_nearest2(BasicGraph<T>& g, const BasicTensor<T>& input) {
    require_feature_map(input, "upsample input");
    const auto C = input.dim(0), D = input.dim(1), H = input.dim(2), W = input.dim(3);
    BasicTensor<T> out = BasicTensor<T>::zeros({C, 2 * D, 2 * H, 2 * W});
    const T* in = input.data();
    T* o = out.data();
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t z = 0; z < 2 * D; ++z)
            for (std::int64_t y = 0; y < 2 * H; ++y) {
                const T* src = in + ((c * D + z / 2) * H + y / 2) * W;
                T* dst = o + ((c * 2 * D + z) * 2 * H + y) * 2 * W;
                for (std::int64_t x = 0; x < 2 * W; ++x) dst[x] = src[x / 2];
            }
    g.record(out, {input}, [input, out]() mutable {
        const auto C = input.dim(0), D = input.dim(1), H = input.dim(2), W = input.dim(3);
        const T* dout = out.grad().data();
        T* din = input.grad().data();
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t z = 0; z < 2 * D; ++z)
                for (std::int64_t y = 0; y < 2 * H; ++y) {
                    T* dst = din + ((c * D + z / 2) * H + y / 2) * W;
                    const T* src = dout + ((c * 2 * D + z) * 2 * H + y) * 2 * W;
                    for (std::int64_t x = 0; x < 2 * W; ++x) dst[x / 2] += src[x];
                }
    });
    return out;
}

template <typename T>
BasicTensor<T> concat_channels(BasicGraph<T>& g, const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_feature_map(a, "concat operand");
    require_feature_map(b, "concat operand");
    STATIONING_REQUIRE(a.dim(1) == b.dim(1) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
                       "concat_channels spatial mismatch: " + shape_string(a.shape()) + " vs " +
                           shape_string(b.shape()));
    BasicTensor<T> out = BasicTensor<T>::zeros({a.dim(0) + b.dim(0), a.dim(1), a.dim(2), a.dim(3)});
    auto o = out.values();
    std::copy(a.values().begin(), a.values().end(), o.begin());
    std::copy(b.values().begin(), b.values().end(), o.begin() + a.numel());
    g.record(out, {a, b}, [a, b, out]() mutable {
        auto dout = out.grad();
        if (a.requires_grad()) accumulate<T>(a.grad(), dout.subspan(0, a.numel()));
        if (b.requires_grad()) accumulate<T>(b.grad(), dout.subspan(a.numel(), b.numel()));
    });
    return out;
}

template <typename T>
BasicTensor<T> scale_channel(BasicGraph<T>& g, const BasicTensor<T>& x, int channel, const BasicTensor<T>& scale) {
    require_feature_map(x, "scale_channel input");
    STATIONING_REQUIRE(channel >= 0 && channel < x.dim(0), "scale_channel index out of range");
    STATIONING_REQUIRE(scale.defined() && scale.numel() == 1, "scale_channel needs a one-element scale");
    const auto S = spatial_size(x);
    BasicTensor<T> out = x.detached();
    const T s = scale.item();
    T* o = out.data() + channel * S;
    for (std::int64_t i = 0; i < S; ++i) o[i] *= s;
    g.record(out, {x, scale}, [x, scale, out, channel, S]() mutable {
        const T* dout = out.grad().data();
        if (x.requires_grad()) {
            T* dx = x.grad().data();
            const T s = scale.item();
            const std::int64_t lo = channel * S, hi = lo + S;
            for (std::int64_t i = 0; i < x.numel(); ++i) dx[i] += (i >= lo && i < hi) ? dout[i] * s : dout[i];
        }
        if (scale.requires_grad()) {
            const T* xc = x.data() + channel * S;
            const T* oc = dout + channel * S;
            double acc = 0.0;
            for (std::int64_t i = 0; i < S; ++i) acc += static_cast<double>(oc[i]) * xc[i];
            scale.grad()[0] += static_cast<T>(acc);
        }
    });
    return out;
}

template <typename T>
BasicTensor<T> scale_channels(BasicGraph<T>& g, const BasicTensor<T>& x, const BasicTensor<T>& weights) {
    require_feature_map(x, "scale_channels input");
    STATIONING_REQUIRE(weights.defined() && weights.numel() == x.dim(0),
                       "scale_channels arity mismatch: " + std::to_string(x.dim(0)) + " channels, " +
                           std::to_string(weights.defined() ? weights.numel() : 0) + " weights");
    const auto C = x.dim(0);
    const auto S = spatial_size(x);
    BasicTensor<T> out = BasicTensor<T>::zeros(x.shape());
    for (std::int64_t c = 0; c < C; ++c) {
        const T w = weights.data()[c];
        const T* src = x.data() + c * S;
        T* dst = out.data() + c * S;
        for (std::int64_t i = 0; i < S; ++i) dst[i] = src[i] * w;
    }
    g.record(out, {x, weights}, [x, weights, out, C, S]() mutable {
        const T* dout = out.grad().data();
        if (x.requires_grad()) {
            T* dx = x.grad().data();
            for (std::int64_t c = 0; c < C; ++c) {
                const T w = weights.data()[c];
                for (std::int64_t i = 0; i < S; ++i) dx[c * S + i] += dout[c * S + i] * w;
            }
        }
        if (weights.requires_grad()) {
            auto dw = weights.grad();
            for (std::int64_t c = 0; c < C; ++c) {
                double acc = 0.0;
                for (std::int64_t i = 0; i < S; ++i) acc += static_cast<double>(dout[c * S + i]) * x.data()[c * S + i];
                dw[c] += static_cast<T>(acc);
            }
        }
    });
    return out;
}

template <typename T>
BasicTensor<T> leaky_relu(BasicGraph<T>& g, const BasicTensor<T>& x, T slope) {
    BasicTensor<T> out = BasicTensor<T>::zeros(x.shape());
    const T* in = x.data();
    T* o = out.data();
    const auto n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) o[i] = in[i] > T(0) ? in[i] : slope * in[i];
    g.record(out, {x}, [x, out, slope]() mutable {
        const T* in = x.data();
        const T* dout = out.grad().data();
        T* dx = x.grad().data();
        const auto n = x.numel();
        for (std::int64_t i = 0; i < n; ++i) dx[i] += in[i] > T(0) ? dout[i] : slope * dout[i];
    });
    return out;
}

template <typename T>
BasicTensor<T> instance_norm(BasicGraph<T>& g, const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta, T eps) {
    require_feature_map(x, "instance_norm input");
    const auto C = x.dim(0);
    const auto S = spatial_size(x);
    STATIONING_REQUIRE(gamma.numel() == C && beta.numel() == C, "instance_norm affine parameters must have C entries");
    auto xhat = std::make_shared<std::vector<T>>(static_cast<std::size_t>(x.numel()));
    auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(C));
    BasicTensor<T> out = BasicTensor<T>::zeros(x.shape());
    for (std::int64_t c = 0; c < C; ++c) {
        const T* src = x.data() + c * S;
        double mean = 0.0;
        for (std::int64_t i = 0; i < S; ++i) mean += src[i];
        mean /= static_cast<double>(S);
        double var = 0.0;
        for (std::int64_t i = 0; i < S; ++i) {
            const double d = src[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(S);
        const T is = static_cast<T>(1.0 / std::sqrt(var + eps));
        (*inv_std)[c] = is;
        const T m = static_cast<T>(mean);
        const T ga = gamma.data()[c], be = beta.data()[c];
        T* xh = xhat->data() + c * S;
        T* dst = out.data() + c * S;
        for (std::int64_t i = 0; i < S; ++i) {
            xh[i] = (src[i] - m) * is;
            dst[i] = ga * xh[i] + be;
        }
    }
    g.record(out, {x, gamma, beta}, [x, gamma, beta, out, xhat, inv_std, C, S]() mutable {
        const T* dout = out.grad().data();
        for (std::int64_t c = 0; c < C; ++c) {
            const T* dy = dout + c * S;
            const T* xh = xhat->data() + c * S;
            double sum_dy = 0.0, sum_dy_xh = 0.0;
            for (std::int64_t i = 0; i < S; ++i) {
                sum_dy += dy[i];
                sum_dy_xh += static_cast<double>(dy[i]) * xh[i];
            }
            if (gamma.requires_grad()) gamma.grad()[c] += static_cast<T>(sum_dy_xh);
            if (beta.requires_grad()) beta.grad()[c] += static_cast<T>(sum_dy);
            if (x.requires_grad()) {
                const T ga = gamma.data()[c];
                const T scale = ga * (*inv_std)[c] / static_cast<T>(S);
                const T mdy = static_cast<T>(sum_dy);
                const T mdyx = static_cast<T>(sum_dy_xh);
                T* dx = x.grad().data() + c * S;
                const T n = static_cast<T>(S);
                for (std::int64_t i = 0; i < S; ++i) dx[i] += scale * (n * dy[i] - mdy - xh[i] * mdyx);
            }
        }
    });
    return out;
}

template <typename T>
BasicTensor<T> softmax(BasicGraph<T>& g, const BasicTensor<T>& x, int axis) {
    STATIONING_REQUIRE(x.defined() && axis >= 0 && static_cast<std::size_t>(axis) < x.rank(),
                       "softmax axis out of range");
    const auto& shape = x.shape();
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
    const std::int64_t n = shape[axis];
    BasicTensor<T> out = BasicTensor<T>::zeros(shape);
    std::vector<T> scratch(static_cast<std::size_t>(inner));
    for (std::int64_t o = 0; o < outer; ++o) {
        const T* in = x.data() + o * n * inner;
        T* dst = out.data() + o * n * inner;
        std::copy(in, in + inner, scratch.begin());
        for (std::int64_t k = 1; k < n; ++k)
            for (std::int64_t i = 0; i < inner; ++i) scratch[i] = std::max(scratch[i], in[k * inner + i]);
        for (std::int64_t k = 0; k < n; ++k)
            for (std::int64_t i = 0; i < inner; ++i) dst[k * inner + i] = std::exp(in[k * inner + i] - scratch[i]);
        std::fill(scratch.begin(), scratch.end(), T(0));
        for (std::int64_t k = 0; k < n; ++k)
            for (std::int64_t i = 0; i < inner; ++i) scratch[i] += dst[k * inner + i];
        for (std::int64_t k = 0; k < n; ++k)
            for (std::int64_t i = 0; i < inner; ++i) dst[k * inner + i] /= scratch[i];
    }
    g.record(out, {x}, [x, out, outer, inner, n]() mutable {
        const T* dout = out.grad().data();
        const T* y = out.data();
        T* dx = x.grad().data();
        std::vector<T> dotv(static_cast<std::size_t>(inner));
        for (std::int64_t o = 0; o < outer; ++o) {
            const std::int64_t base = o * n * inner;
            std::fill(dotv.begin(), dotv.end(), T(0));
            for (std::int64_t k = 0; k < n; ++k)
                for (std::int64_t i = 0; i < inner; ++i) dotv[i] += dout[base + k * inner + i] * y[base + k * inner + i];
            for (std::int64_t k = 0; k < n; ++k)
                for (std::int64_t i = 0; i < inner; ++i) {
                    const auto j = base + k * inner + i;
                    dx[j] += y[j] * (dout[j] - dotv[i]);
                }
        }
    });
    return out;
}

template <typename T>
BasicTensor<T> sum(BasicGraph<T>& g, const BasicTensor<T>& x) {
    double acc = 0.0;
    for (T v : x.values()) acc += v;
    BasicTensor<T> out = BasicTensor<T>::scalar(static_cast<T>(acc));
    g.record(out, {x}, [x, out]() mutable {
        const T d = out.grad()[0];
        for (auto& v : x.grad()) v += d;
    });
    return out;
}

template <typename T>
BasicTensor<T> dot(BasicGraph<T>& g, const BasicTensor<T>& x, const BasicTensor<T>& constant) {
    STATIONING_REQUIRE(x.numel() == constant.numel(), "dot operands differ in size");
    double acc = 0.0;
    for (std::int64_t i = 0; i < x.numel(); ++i) acc += static_cast<double>(x.data()[i]) * constant.data()[i];
    BasicTensor<T> out = BasicTensor<T>::scalar(static_cast<T>(acc));
    g.record(out, {x}, [x, constant, out]() mutable {
        const T d = out.grad()[0];
        auto dx = x.grad();
        for (std::int64_t i = 0; i < x.numel(); ++i) dx[i] += d * constant.data()[i];
    });
    return out;
}

#define STATIONING_INSTANTIATE_OPS(T)                                                                  \
    template BasicTensor<T> conv3d(BasicGraph<T>&, const BasicTensor<T>&, const BasicTensor<T>&,                 \
                                   const BasicTensor<T>&, int, int);                                             \
    template BasicTensor<T> upsample_nearest2(BasicGraph<T>&, const BasicTensor<T>&);                            \
    template BasicTensor<T> concat_channels(BasicGraph<T>&, const BasicTensor<T>&, const BasicTensor<T>&);       \
    template BasicTensor<T> scale_channel(BasicGraph<T>&, const BasicTensor<T>&, int, const BasicTensor<T>&);    \
    template BasicTensor<T> scale_channels(BasicGraph<T>&, const BasicTensor<T>&, const BasicTensor<T>&);        \
    template BasicTensor<T> leaky_relu(BasicGraph<T>&, const BasicTensor<T>&, T);                                \
    template BasicTensor<T> instance_norm(BasicGraph<T>&, const BasicTensor<T>&, const BasicTensor<T>&,          \
                                          const BasicTensor<T>&, T);                                             \
    template BasicTensor<T> softmax(BasicGraph<T>&, const BasicTensor<T>&, int);                                 \
    template BasicTensor<T> sum(BasicGraph<T>&, const BasicTensor<T>&);                                          \
    template BasicTensor<T> dot(BasicGraph<T>&, const BasicTensor<T>&, const BasicTensor<T>&);

STATIONING_INSTANTIATE_OPS(float)
STATIONING_INSTANTIATE_OPS(double)

}  // namespace stationing::numerics
