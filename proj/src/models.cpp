#include "gocom/models.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

namespace gocom::models {
namespace {

std::string pname(std::size_t layer, std::string_view field) {
    std::string idx = std::to_string(layer);
    if (idx.size() < 2) idx.insert(0, "0");
    return "l" + idx + "." + std::string(field);
}

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in));
    return rand_uniform(std::move(shape), rng, -a, a);
}

Shape batched(std::size_t n, const Shape& per_sample) {
    Shape s{n};
    s.insert(s.end(), per_sample.begin(), per_sample.end());
    return s;
}

void check_batch(std::string_view prim, Var x, const Shape& per_sample) {
    const auto& s = x.shape();
    if (s.size() != per_sample.size() + 1 || !std::equal(per_sample.begin(), per_sample.end(), s.begin() + 1)) {
        throw ShapeError(prim, "expected [N]" + shape_str(per_sample) + ", got " + shape_str(s));
    }
}

}  // namespace

double snr_feature(const channel::Snr& snr) {
    const double db = snr.is_noiseless() ? 20.0 : std::clamp(snr.value_db(), -10.0, 20.0);
    return db / 10.0;
}

Network::Network(std::vector<LayerSpec> layers, Rng& rng) : layers_(std::move(layers)) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        switch (l.kind) {
            case LayerKind::dense:
                params_.add(pname(i, "weight"), uniform_init({l.in, l.out}, l.in, rng));
                params_.add(pname(i, "bias"), Tensor({l.out}));
                break;
            case LayerKind::conv:
                params_.add(pname(i, "weight"),
                            uniform_init({l.out, l.in, l.kernel, l.kernel}, l.in * l.kernel * l.kernel, rng));
                params_.add(pname(i, "bias"), Tensor({l.out}));
                break;
            case LayerKind::conv_transpose:
                params_.add(pname(i, "weight"),
                            uniform_init({l.in, l.out, l.kernel, l.kernel}, l.in * l.kernel * l.kernel, rng));
                params_.add(pname(i, "bias"), Tensor({l.out}));
                break;
            case LayerKind::prelu:
                params_.add(pname(i, "slope"), Tensor({l.in}, 0.25));
                break;
            case LayerKind::snr_gate:
                params_.add(pname(i, "gate_in.weight"),
                            uniform_init({l.in + 1, kGateHidden}, l.in + 1, rng));
                params_.add(pname(i, "gate_in.bias"), Tensor({kGateHidden}));
                params_.add(pname(i, "gate_slope"), Tensor({kGateHidden}, 0.25));
                params_.add(pname(i, "gate_out.weight"),
                            uniform_init({kGateHidden, l.in}, kGateHidden, rng));
                // Gates start mostly open.
                params_.add(pname(i, "gate_out.bias"), Tensor({l.in}, 2.0));
                break;
            case LayerKind::relu:
            case LayerKind::sigmoid:
            case LayerKind::flatten:
            case LayerKind::reshape:
                break;
        }
    }
}

bool Network::has_snr_gate() const {
    return std::any_of(layers_.begin(), layers_.end(),
                       [](const LayerSpec& l) { return l.kind == LayerKind::snr_gate; });
}

Var Network::forward(Tape& tape, Var x, double snr_feat, bool trainable) {
    auto p = [&](std::size_t i, std::string_view field) {
        const std::string name = pname(i, field);
        return trainable ? tape.param(params_, name, true) : tape.param(std::as_const(params_), name);
    };
    auto dense = [&](Var in, std::size_t i, std::string_view prefix) {
        const std::string w = std::string(prefix) + "weight";
        const std::string b = std::string(prefix) + "bias";
        return add_bias(matmul(in, p(i, w)), p(i, b));
    };
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        switch (l.kind) {
            case LayerKind::dense:
                x = dense(x, i, "");
                break;
            case LayerKind::conv:
                x = add_bias(conv2d(x, p(i, "weight"), l.conv), p(i, "bias"));
                break;
            case LayerKind::conv_transpose:
                x = add_bias(conv2d_transpose(x, p(i, "weight"), l.conv), p(i, "bias"));
                break;
            case LayerKind::prelu:
                x = gocom::prelu(x, p(i, "slope"));
                break;
            case LayerKind::relu:
                x = gocom::relu(x);
                break;
            case LayerKind::sigmoid:
                x = gocom::sigmoid(x);
                break;
            case LayerKind::flatten:
                x = gocom::flatten(x);
                break;
            case LayerKind::reshape:
                x = gocom::reshape(x, batched(x.shape()[0], l.shape));
                break;
            case LayerKind::snr_gate: {
                const std::size_t n = x.shape()[0];
                Var pooled = x.shape().size() > 2 ? channel_mean(x) : x;
                Var feat = concat_cols(pooled, tape.constant(Tensor({n, 1}, snr_feat)));
                Var h = gocom::prelu(dense(feat, i, "gate_in."), p(i, "gate_slope"));
                Var gate = gocom::sigmoid(dense(h, i, "gate_out."));
                x = mul_channel(x, gate);
                break;
            }
        }
    }
    return x;
}

Var GoeModel::encode(Tape& tape, Var x, const channel::Snr& snr, bool trainable) {
    check_batch("goe_encode", x, input_shape);
    Var raw = net.forward(tape, x, snr_conditioning ? snr_feature(snr) : 0.0, trainable);
    if (raw.shape().size() != 2 || raw.shape()[1] != 2 * symbols) {
        throw ShapeError("goe_encode", "network emits " + shape_str(raw.shape()) + " for " +
                                           std::to_string(symbols) + " symbols");
    }
    return normalize_power(raw);
}

Var DemapperModel::demap(Tape& tape, Var z_hat, const channel::Snr& snr, bool trainable) {
    check_batch("demap", z_hat, {2 * symbols});
    Var w = net.forward(tape, z_hat, snr_conditioning ? snr_feature(snr) : 0.0, trainable);
    check_batch("demap", w, output_shape);
    return w;
}

Var TaskModel::forward(Tape& tape, Var w, bool trainable) {
    check_batch("task", w, input_shape);
    if (kind == HeadKind::identity) return w;
    Var y = net.forward(tape, w, 0.0, trainable && !frozen);
    if (y.shape() != Shape{w.shape()[0], outputs}) {
        throw ShapeError("task", "head emits " + shape_str(y.shape()) + ", expected " +
                                     std::to_string(outputs) + " outputs");
    }
    return y;
}

Rate Rate::parse(std::string_view s) {
    auto parse_uint = [&](std::string_view t) {
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc{} || ptr != t.data() + t.size()) {
            throw std::invalid_argument("bad rate: " + std::string(s));
        }
        return v;
    };
    Rate r;
    if (auto slash = s.find('/'); slash != std::string_view::npos) {
        r.num = parse_uint(s.substr(0, slash));
        r.den = parse_uint(s.substr(slash + 1));
    } else {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size()) throw std::invalid_argument("bad rate: " + std::string(s));
        r.den = 1000000;
        r.num = static_cast<std::size_t>(std::llround(v * 1e6));
    }
    if (r.den == 0 || r.num == 0 || r.num > r.den) throw std::invalid_argument("rate must lie in (0,1]: " + std::string(s));
    const auto g = std::gcd(r.num, r.den);
    r.num /= g;
    r.den /= g;
    return r;
}

std::size_t symbols_for_rate(std::size_t input_dims, Rate r) {
    if (input_dims == 0) throw std::invalid_argument("input_dims must be >= 1");
    if (r.den == 0 || r.num == 0 || r.num > r.den) throw std::invalid_argument("rate must lie in (0,1]");
    const std::size_t s = (2 * input_dims * r.num + r.den) / (2 * r.den);
    return std::max<std::size_t>(s, 1);
}

GoeModel make_conv_goe(const Shape& input, std::size_t symbols, bool snr_conditioning, Rng& rng) {
    if (input.size() != 3 || input[1] % 4 || input[2] % 4) {
        throw ShapeError("make_conv_goe", "needs [C,H,W] with H,W divisible by 4, got " + shape_str(input));
    }
    const ConvAttrs down{2, 1, 0};
    const std::size_t flat = 32 * (input[1] / 4) * (input[2] / 4);
    std::vector<LayerSpec> l{LayerSpec::conv2d(input[0], 16, 3, down), LayerSpec::prelu(16)};
    if (snr_conditioning) l.push_back(LayerSpec::snr_gate(16));
    l.push_back(LayerSpec::conv2d(16, 32, 3, down));
    l.push_back(LayerSpec::prelu(32));
    if (snr_conditioning) l.push_back(LayerSpec::snr_gate(32));
    l.push_back(LayerSpec::flatten());
    l.push_back(LayerSpec::dense(flat, 2 * symbols));
    return GoeModel{Network(std::move(l), rng), input, symbols, snr_conditioning};
}

DemapperModel make_conv_demapper(const Shape& output, std::size_t symbols, bool snr_conditioning,
                                 Rng& rng) {
    if (output.size() != 3 || output[1] % 4 || output[2] % 4) {
        throw ShapeError("make_conv_demapper", "needs [C,H,W] with H,W divisible by 4, got " + shape_str(output));
    }
    const ConvAttrs up{2, 1, 1};
    const std::size_t h = output[1] / 4, w = output[2] / 4;
    std::vector<LayerSpec> l{LayerSpec::dense(2 * symbols, 32 * h * w), LayerSpec::reshape({32, h, w}),
                             LayerSpec::prelu(32)};
    if (snr_conditioning) l.push_back(LayerSpec::snr_gate(32));
    l.push_back(LayerSpec::conv2d_transpose(32, 16, 3, up));
    l.push_back(LayerSpec::prelu(16));
    if (snr_conditioning) l.push_back(LayerSpec::snr_gate(16));
    l.push_back(LayerSpec::conv2d_transpose(16, output[0], 3, up));
    l.push_back(LayerSpec::sigmoid());
    return DemapperModel{Network(std::move(l), rng), output, symbols, snr_conditioning};
}

TaskModel make_conv_classifier(const Shape& input, std::size_t classes, Rng& rng) {
    if (input.size() != 3 || input[1] % 4 || input[2] % 4) {
        throw ShapeError("make_conv_classifier", "needs [C,H,W] with H,W divisible by 4, got " + shape_str(input));
    }
    const ConvAttrs down{2, 1, 0};
    const std::size_t flat = 32 * (input[1] / 4) * (input[2] / 4);
    std::vector<LayerSpec> l{LayerSpec::conv2d(input[0], 16, 3, down), LayerSpec::relu(),
                             LayerSpec::conv2d(16, 32, 3, down),       LayerSpec::relu(),
                             LayerSpec::flatten(),                     LayerSpec::dense(flat, 128),
                             LayerSpec::relu(),                        LayerSpec::dense(128, classes)};
    return TaskModel{Network(std::move(l), rng), HeadKind::classifier, input, classes, false};
}

GoeModel make_dense_goe(const Shape& input, std::size_t hidden, std::size_t symbols,
                        bool snr_conditioning, Rng& rng) {
    std::vector<LayerSpec> l{LayerSpec::flatten(), LayerSpec::dense(numel(input), hidden),
                             LayerSpec::prelu(hidden)};
    if (snr_conditioning) l.push_back(LayerSpec::snr_gate(hidden));
    l.push_back(LayerSpec::dense(hidden, 2 * symbols));
    return GoeModel{Network(std::move(l), rng), input, symbols, snr_conditioning};
}

DemapperModel make_dense_demapper(const Shape& output, std::size_t hidden, std::size_t symbols,
                                  bool snr_conditioning, Rng& rng) {
    std::vector<LayerSpec> l{LayerSpec::dense(2 * symbols, hidden), LayerSpec::prelu(hidden)};
    if (snr_conditioning) l.push_back(LayerSpec::snr_gate(hidden));
    l.push_back(LayerSpec::dense(hidden, numel(output)));
    l.push_back(LayerSpec::sigmoid());
    l.push_back(LayerSpec::reshape(output));
    return DemapperModel{Network(std::move(l), rng), output, symbols, snr_conditioning};
}

TaskModel make_dense_qnet(const Shape& input, std::size_t hidden, std::size_t actions, Rng& rng) {
    std::vector<LayerSpec> l{LayerSpec::flatten(), LayerSpec::dense(numel(input), hidden),
                             LayerSpec::relu(), LayerSpec::dense(hidden, actions)};
    return TaskModel{Network(std::move(l), rng), HeadKind::q_network, input, actions, false};
}

TaskModel make_identity_task(const Shape& input) {
    return TaskModel{Network(), HeadKind::identity, input, 0, true};
}

JsccModel make_jscc_like(const GoeModel& goe, const DemapperModel& demapper, Rng& rng) {
    GoeModel e{Network(goe.net.layers(), rng), goe.input_shape, goe.symbols, goe.snr_conditioning};
    DemapperModel d{Network(demapper.net.layers(), rng), demapper.output_shape, demapper.symbols,
                    demapper.snr_conditioning};
    return JsccModel{std::move(e), std::move(d)};
}

Composition compose(Tape& tape, GoeModel& goe, channel::Kind kind, const channel::Snr& snr,
                    DemapperModel& demapper, TaskModel& task, Var x, Rng& rng, bool trainable) {
    if (goe.symbols != demapper.symbols || demapper.output_shape != task.input_shape) {
        throw ShapeError("compose", "encoder/demapper/task shapes disagree");
    }
    Composition c;
    c.z = goe.encode(tape, x, snr, trainable);
    c.z_hat = channel::transmit(c.z, kind, snr, rng, &c.realizations);
    c.w = demapper.demap(tape, c.z_hat, snr, trainable);
    c.y_hat = task.forward(tape, c.w, trainable);
    return c;
}

}  // namespace gocom::models
