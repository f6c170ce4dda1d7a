#include "stationing/segnet/segnet.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "stationing/core/error.hpp"
#include "stationing/core/rng.hpp"
#include "stationing/numerics/checkpoint.hpp"
#include "stationing/numerics/loss.hpp"
#include "stationing/numerics/ops.hpp"
#include "stationing/numerics/optimizer.hpp"

namespace stationing::segnet {

using numerics::BasicGraph;
using numerics::BasicTensor;
using numerics::Shape;

namespace {

struct BlockSpec {
    int in = 0;
    int out = 0;
    int stride = 1;
};

std::vector<int> widths(const NetConfig& c) {
    std::vector<int> w;
    for (int l = 0; l < c.depth; ++l) w.push_back(c.base_width << l);
    return w;
}

// Encoder blocks level by level, then decoder blocks from the deepest level up.
std::vector<BlockSpec> blocks(const NetConfig& c) {
    const auto w = widths(c);
    std::vector<BlockSpec> b;
    for (int l = 0; l < c.depth; ++l) {
        b.push_back({l == 0 ? c.in_channels : w[l - 1], w[l], l == 0 ? 1 : 2});
        b.push_back({w[l], w[l], 1});
    }
    for (int l = c.depth - 2; l >= 0; --l) {
        b.push_back({w[l] + w[l + 1], w[l], 1});
        b.push_back({w[l], w[l], 1});
    }
    return b;
}

template <typename T>
BasicTensor<T> block(BasicGraph<T>& g, const BasicTensor<T>& x, const std::vector<BasicTensor<T>>& p,
                     std::size_t& next, int stride) {
    const auto& w = p[next];
    const auto& b = p[next + 1];
    const auto& gamma = p[next + 2];
    const auto& beta = p[next + 3];
    next += 4;
    auto y = numerics::conv3d(g, x, w, b, stride, 1);
    y = numerics::instance_norm(g, y, gamma, beta);
    return numerics::leaky_relu(g, y);
}

}  // namespace

void validate(const NetConfig& c) {
    if (c.depth < 2) throw ConfigError("depth must be at least 2");
    if (c.classes < 2) throw ConfigError("at least two classes (background + 1) are required");
    if (c.classes > 255) throw ConfigError("at most 255 classes fit an 8-bit label map");
    if (c.in_channels < 1) throw ConfigError("input channel count must be positive");
    if (c.base_width < 1) throw ConfigError("base width must be positive");
    const int f = 1 << (c.depth - 1);
    const auto& e = c.extents;
    if (e.x < 1 || e.y < 1 || e.z < 1 || e.x % f || e.y % f || e.z % f)
        throw ConfigError("grid extents " + std::to_string(e.x) + "x" + std::to_string(e.y) + "x" +
                          std::to_string(e.z) + " are not divisible by " + std::to_string(f));
}

std::vector<Shape> parameter_shapes(const NetConfig& c) {
    std::vector<Shape> shapes;
    for (const auto& b : blocks(c)) {
        shapes.push_back({b.out, b.in, 3, 3, 3});
        shapes.push_back({b.out});
        shapes.push_back({b.out});
        shapes.push_back({b.out});
    }
    shapes.push_back({c.classes, c.base_width, 1, 1, 1});
    shapes.push_back({c.classes});
    return shapes;
}

std::int64_t parameter_count(const NetConfig& c) {
    std::int64_t n = 0;
    for (const auto& s : parameter_shapes(c)) n += numerics::shape_numel(s);
    return n;
}

Model build_model(const NetConfig& config) {
    validate(config);
    Model m;
    m.config = config;
    const auto shapes = parameter_shapes(config);
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        const auto& s = shapes[i];
        if (s.size() == 5) {
            const double fan_in = static_cast<double>(s[1] * s[2] * s[3] * s[4]);
            const double std = std::sqrt(2.0 / fan_in);
            const CounterRng rng(derive_seed(config.seed, "init", i));
            std::vector<float> v(static_cast<std::size_t>(numerics::shape_numel(s)));
            for (std::size_t k = 0; k < v.size(); ++k) v[k] = static_cast<float>(std * rng.gaussian(k));
            m.params.push_back(Tensor::from(s, std::move(v), true));
        } else {
            // Blocks store (kernel, bias, gamma, beta); the head ends with (kernel, bias).
            const bool gamma = i + 2 < shapes.size() && i % 4 == 2;
            m.params.push_back(Tensor::full(s, gamma ? 1.0f : 0.0f, true));
        }
    }
    return m;
}

template <typename T>
BasicTensor<T> forward(BasicGraph<T>& g, const NetConfig& c, const std::vector<BasicTensor<T>>& p,
                       const BasicTensor<T>& input) {
    STATIONING_REQUIRE(p.size() == parameter_shapes(c).size(), "parameter list does not match the config");
    const Shape want = {c.in_channels, c.extents.z, c.extents.y, c.extents.x};
    STATIONING_REQUIRE(input.shape() == want, "network input has shape " + numerics::shape_string(input.shape()) +
                                                  ", expected " + numerics::shape_string(want));
    std::size_t next = 0;
    std::vector<BasicTensor<T>> skips;
    auto x = input;
    for (int l = 0; l < c.depth; ++l) {
        x = block(g, x, p, next, l == 0 ? 1 : 2);
        x = block(g, x, p, next, 1);
        skips.push_back(x);
    }
    for (int l = c.depth - 2; l >= 0; --l) {
        auto up = numerics::upsample_nearest2(g, x);
        x = numerics::concat_channels(g, skips[l], up);
        x = block(g, x, p, next, 1);
        x = block(g, x, p, next, 1);
    }
    auto logits = numerics::conv3d(g, x, p[next], p[next + 1], 1, 0);
    return numerics::softmax(g, logits, 0);
}

template numerics::Tensor forward<float>(numerics::Graph&, const NetConfig&, const std::vector<numerics::Tensor>&,
                                         const numerics::Tensor&);
template numerics::TensorD forward<double>(numerics::GraphD&, const NetConfig&,
                                           const std::vector<numerics::TensorD>&, const numerics::TensorD&);

Tensor predict_probs(const Model& model, const Tensor& input) {
    Graph g;
    auto probs = forward(g, model.config, model.params, input);
    return probs.detached();
}

LabelMap argmax_labels(const Tensor& probs, const Spacing& spacing) {
    STATIONING_REQUIRE(probs.rank() == 4, "argmax_labels expects [C, D, H, W]");
    const auto C = probs.dim(0);
    STATIONING_REQUIRE(C <= 256, "too many classes for an 8-bit label map");
    const Extents e{static_cast<int>(probs.dim(3)), static_cast<int>(probs.dim(2)), static_cast<int>(probs.dim(1))};
    LabelMap out(e, spacing, 0);
    const auto n = e.voxels();
    const auto v = probs.values();
    for (std::size_t i = 0; i < n; ++i) {
        std::int64_t best = 0;
        for (std::int64_t c = 1; c < C; ++c)
            if (v[c * n + i] > v[best * n + i]) best = c;
        out.data[i] = static_cast<std::uint8_t>(best);
    }
    return out;
}

LabelMap predict_labels(const Model& model, const Tensor& input, const Spacing& spacing) {
    return argmax_labels(predict_probs(model, input), spacing);
}

Tensor image_tensor(const Volume& image) {
    const auto& e = image.extents;
    return Tensor::from({1, e.z, e.y, e.x}, image.data);
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    const CounterRng rng(derive_seed(seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i, i)]);
    return order;
}

void train(Model& model, const std::vector<Sample>& data, const TrainSchedule& s, const TrainHooks& hooks) {
    STATIONING_REQUIRE(!data.empty(), "training set is empty");
    STATIONING_REQUIRE(s.epochs >= 0, "epoch count must be non-negative");
    const auto voxels = model.config.extents.voxels();
    for (const auto& d : data) {
        STATIONING_REQUIRE(d.target.size() == voxels, "target of " + d.id + " does not match the grid");
        for (auto t : d.target)
            STATIONING_REQUIRE(t < model.config.classes, "target of " + d.id + " has a label out of range");
    }
    numerics::Adam opt(model.params, {s.lr});
    std::unique_ptr<numerics::Adam> extra;
    if (!hooks.extra_params.empty()) extra = std::make_unique<numerics::Adam>(hooks.extra_params,
                                                                             numerics::AdamConfig{hooks.extra_lr});
    const int decay_epoch = s.decay_at < 1.0 ? static_cast<int>(std::floor(s.decay_at * s.epochs)) : s.epochs;

    for (int epoch = 0; epoch < s.epochs; ++epoch) {
        opt.set_lr(epoch >= decay_epoch ? s.lr * s.decay : s.lr);
        const auto order = epoch_order(data.size(), s.seed, epoch);
        double total = 0.0;
        for (std::size_t b = 0; b < order.size(); ++b) {
            const auto i = order[b];
            if (hooks.on_access) hooks.on_access(i);
            Graph g;
            const Tensor input = hooks.make_input ? hooks.make_input(g, i) : data[i].input;
            auto probs = forward(g, model.config, model.params, input);
            auto loss = numerics::dice_ce_loss(g, probs, data[i].target, model.config.classes);
            const double value = loss.item();
            if (!std::isfinite(value))
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", case " + data[i].id);
            opt.zero_grad();
            if (extra) extra->zero_grad();
            g.backward(loss);
            const bool step_extra = extra && hooks.extra_step && hooks.extra_step(epoch, static_cast<int>(b));
            if (step_extra) {
                for (const auto& p : hooks.extra_params)
                    for (float v : p.grad())
                        if (!std::isfinite(v))
                            throw NumericError("non-finite channel-weight gradient at epoch " + std::to_string(epoch) +
                                               ", case " + data[i].id);
                extra->step();
            } else {
                opt.step();
            }
            total += value;
        }
        model.loss_log.push_back(total / static_cast<double>(order.size()));
        if (hooks.on_epoch_end) hooks.on_epoch_end(epoch);
    }
}

nlohmann::json to_json(const NetConfig& c) {
    return {{"in_channels", c.in_channels},
            {"classes", c.classes},
            {"depth", c.depth},
            {"base_width", c.base_width},
            {"extents", {c.extents.x, c.extents.y, c.extents.z}},
            {"seed", c.seed}};
}

NetConfig net_config_from_json(const nlohmann::json& j, NetConfig c) {
    try {
        c.in_channels = j.value("in_channels", c.in_channels);
        c.classes = j.value("classes", c.classes);
        c.depth = j.value("depth", c.depth);
        c.base_width = j.value("base_width", c.base_width);
        if (j.contains("extents")) {
            const auto e = j.at("extents").get<std::array<int, 3>>();
            c.extents = {e[0], e[1], e[2]};
        }
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("net config: ") + e.what());
    }
    return c;
}

void save_model(const Model& model, const std::filesystem::path& path) {
    nlohmann::json header;
    header["layers"] = "segnet";
    header["config"] = to_json(model.config);
    header["seed"] = model.config.seed;
    header["loss_log"] = model.loss_log;
    numerics::save_checkpoint(path, header, model.params);
}

Model load_model(const std::filesystem::path& path) {
    auto ck = numerics::load_checkpoint(path);
    if (ck.header.value("layers", std::string()) != "segnet")
        throw IoError(path.filename().string() + ": not a segnet checkpoint");
    Model m;
    m.config = net_config_from_json(ck.header.at("config"));
    const auto shapes = parameter_shapes(m.config);
    if (shapes.size() != ck.params.size()) throw IoError(path.filename().string() + ": parameter count mismatch");
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        if (ck.params[i].shape() != shapes[i]) throw IoError(path.filename().string() + ": parameter shape mismatch");
        ck.params[i].set_requires_grad(true);
    }
    m.params = std::move(ck.params);
    m.loss_log = ck.header.value("loss_log", std::vector<double>{});
    return m;
}

void write_loss_log(const Model& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "epoch,loss\n";
    char buf[64];
    for (std::size_t e = 0; e < model.loss_log.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%zu,%.9g\n", e, model.loss_log[e]);
        out << buf;
    }
}

}  // namespace stationing::segnet
