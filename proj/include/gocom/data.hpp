#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "gocom/tensor.hpp"

namespace gocom::data {

enum class Split { train, test };

/// Labeled images, inputs [n, C, H, W] scaled to [0,1].
struct Dataset {
    Tensor inputs;
    std::vector<std::size_t> labels;
    std::size_t classes = 0;
    Split split = Split::train;

    std::size_t size() const noexcept { return labels.size(); }
    Shape sample_shape() const;
    Tensor gather(std::span<const std::size_t> idx) const;
    std::vector<std::size_t> gather_labels(std::span<const std::size_t> idx) const;
    /// Throws if counts disagree or a label is out of range.
    void validate() const;
};

class IdxError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reads an IDX image/label pair (optionally gzip-compressed). Images must
/// carry magic 0x00000803 and labels 0x00000801; pixels are divided by 255.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 Split split = Split::train);

struct SynthConfig {
    std::size_t n = 1000;
    std::size_t classes = 10;
    double noise = 0.25;      // stddev of additive pixel noise before clipping
    std::size_t side = 8;
    std::size_t blobs = 2;    // Gaussian blobs per class prototype
    std::uint64_t seed = 0;
};

/// Class prototypes are sums of Gaussian blobs rendered on a side x side
/// grid; samples are prototype + noise, clipped to [0,1]. Labels cycle
/// through the classes so every class gets floor or ceil of n / classes.
/// The prototype layout depends only on (classes, side, blobs, seed).
Dataset gen_synth(const SynthConfig& cfg, Split split = Split::train);

/// The noise-free prototypes used by gen_synth, [classes, 1, side, side].
Tensor synth_prototypes(const SynthConfig& cfg);

}  // namespace gocom::data
