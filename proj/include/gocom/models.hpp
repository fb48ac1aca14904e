#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "gocom/channel.hpp"
#include "gocom/ops.hpp"
#include "gocom/params.hpp"

namespace gocom::models {

enum class LayerKind { dense, conv, conv_transpose, prelu, relu, sigmoid, flatten, reshape, snr_gate };

/// One stage of a feed-forward stack. Only the fields relevant to `kind` are used:
/// dense uses in/out, conv and conv_transpose use in/out channels plus kernel
/// and conv, prelu and snr_gate use `in` as the channel count, reshape uses
/// `shape` (per sample, batch axis excluded).
struct LayerSpec {
    LayerKind kind;
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t kernel = 0;
    ConvAttrs conv{};
    Shape shape{};

    static LayerSpec dense(std::size_t in, std::size_t out) { return {LayerKind::dense, in, out}; }
    static LayerSpec conv2d(std::size_t in, std::size_t out, std::size_t k, ConvAttrs a) {
        return {LayerKind::conv, in, out, k, a};
    }
    static LayerSpec conv2d_transpose(std::size_t in, std::size_t out, std::size_t k, ConvAttrs a) {
        return {LayerKind::conv_transpose, in, out, k, a};
    }
    static LayerSpec prelu(std::size_t channels) { return {LayerKind::prelu, channels}; }
    static LayerSpec relu() { return {LayerKind::relu}; }
    static LayerSpec sigmoid() { return {LayerKind::sigmoid}; }
    static LayerSpec flatten() { return {LayerKind::flatten}; }
    static LayerSpec reshape(Shape s) { return {LayerKind::reshape, 0, 0, 0, {}, std::move(s)}; }
    static LayerSpec snr_gate(std::size_t channels) { return {LayerKind::snr_gate, channels}; }
};

/// Hidden width of the SNR gate's bottleneck.
inline constexpr std::size_t kGateHidden = 16;

/// Scalar fed to SNR gates: dB clamped to [-10, 20] and divided by 10.
/// The noiseless sentinel maps to the upper clamp.
double snr_feature(const channel::Snr& snr);

/// Feed-forward stack of LayerSpecs with its own parameters.
///
/// An snr_gate stage implements the simplified attention-feature block: the
/// incoming activations are average-pooled per channel (rank-2 activations are
/// used as-is), the SNR feature is appended, and a dense -> prelu -> dense ->
/// sigmoid subnetwork produces one multiplicative scale in (0,1) per channel.
class Network {
public:
    Network() = default;
    Network(std::vector<LayerSpec> layers, Rng& init_rng);

    /// With `trainable` false the parameters enter the tape as constants.
    Var forward(Tape& tape, Var x, double snr_feature, bool trainable);

    ParamSet& params() noexcept { return params_; }
    const ParamSet& params() const noexcept { return params_; }
    const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
    bool has_snr_gate() const;

private:
    std::vector<LayerSpec> layers_;
    ParamSet params_;
};

/// Goal-oriented encoder: network followed by unit-power normalization.
struct GoeModel {
    Network net;
    Shape input_shape;  // per sample
    std::size_t symbols = 0;
    bool snr_conditioning = false;

    /// x [N, input_shape...] -> z [N, 2s] with unit mean symbol power per row.
    Var encode(Tape& tape, Var x, const channel::Snr& snr, bool trainable);
};

/// Receiver-side demapper into the source space, sigmoid-bounded to [0,1].
struct DemapperModel {
    Network net;
    Shape output_shape;  // per sample, equals the GOE input shape
    std::size_t symbols = 0;
    bool snr_conditioning = false;

    Var demap(Tape& tape, Var z_hat, const channel::Snr& snr, bool trainable);
};

enum class HeadKind { classifier, q_network, identity };

struct TaskModel {
    Network net;
    HeadKind kind = HeadKind::classifier;
    Shape input_shape;
    std::size_t outputs = 0;  // classes or actions; 0 for identity
    bool frozen = false;

    /// Parameters receive gradients only when `trainable` and not frozen.
    Var forward(Tape& tape, Var w, bool trainable);
};

/// Reconstruction-only baseline: encoder e and decoder d with the same
/// layer stacks as a GOE/demapper pair.
struct JsccModel {
    GoeModel encoder;
    DemapperModel decoder;
};

/// Reduced fraction num/den.
struct Rate {
    std::size_t num = 1;
    std::size_t den = 6;

    static Rate parse(std::string_view s);  // "1/6" or a decimal in (0,1]
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

/// round(input_dims * r), at least 1. Halves round up.
std::size_t symbols_for_rate(std::size_t input_dims, Rate r);

// Default desk-scale architectures.

/// Conv stacks for [C,H,W] images, H and W divisible by 4.
GoeModel make_conv_goe(const Shape& input, std::size_t symbols, bool snr_conditioning, Rng& rng);
DemapperModel make_conv_demapper(const Shape& output, std::size_t symbols, bool snr_conditioning,
                                 Rng& rng);
TaskModel make_conv_classifier(const Shape& input, std::size_t classes, Rng& rng);

/// Dense stacks for flattened observations.
GoeModel make_dense_goe(const Shape& input, std::size_t hidden, std::size_t symbols,
                        bool snr_conditioning, Rng& rng);
DemapperModel make_dense_demapper(const Shape& output, std::size_t hidden, std::size_t symbols,
                                  bool snr_conditioning, Rng& rng);
TaskModel make_dense_qnet(const Shape& input, std::size_t hidden, std::size_t actions, Rng& rng);

/// Parameter-free pass-through head; its output is w itself.
TaskModel make_identity_task(const Shape& input);

/// Same layer stacks as the given pair, freshly initialized.
JsccModel make_jscc_like(const GoeModel& goe, const DemapperModel& demapper, Rng& rng);

struct Composition {
    Var y_hat;
    Var w;
    Var z;
    Var z_hat;
    std::vector<channel::Realization> realizations;
};

/// y_hat = task(demap(channel(encode(x)))). Exactly one realization is drawn
/// per row of x. `trainable` controls whether gradients reach any parameters.
Composition compose(Tape& tape, GoeModel& goe, channel::Kind kind, const channel::Snr& snr,
                    DemapperModel& demapper, TaskModel& task, Var x, Rng& rng, bool trainable);

}  // namespace gocom::models
