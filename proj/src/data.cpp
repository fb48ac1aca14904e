#include "gocom/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

namespace gocom::data {

Shape Dataset::sample_shape() const {
    const auto& s = inputs.shape();
    return Shape(s.begin() + 1, s.end());
}

Tensor Dataset::gather(std::span<const std::size_t> idx) const {
    const Shape per = sample_shape();
    const std::size_t len = numel(per);
    Shape s{idx.size()};
    s.insert(s.end(), per.begin(), per.end());
    Tensor out(s);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        std::copy_n(inputs.data().begin() + idx[i] * len, len, out.data().begin() + i * len);
    }
    return out;
}

std::vector<std::size_t> Dataset::gather_labels(std::span<const std::size_t> idx) const {
    std::vector<std::size_t> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(labels.at(i));
    return out;
}

void Dataset::validate() const {
    if (inputs.rank() < 2 || inputs.dim(0) != labels.size()) {
        throw std::invalid_argument("dataset: " + std::to_string(labels.size()) + " labels for inputs " +
                                    shape_str(inputs.shape()));
    }
    for (auto y : labels) {
        if (y >= classes) throw std::invalid_argument("dataset: label out of range");
    }
}

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    // gzread passes uncompressed files through unchanged; compressed input is
    // recognized by its 0x1f 0x8b prefix.
    std::unique_ptr<gzFile_s, int (*)(gzFile)> f(gzopen(path.string().c_str(), "rb"), gzclose);
    if (!f) throw IdxError("cannot open " + path.string());
    std::vector<unsigned char> out;
    unsigned char buf[1 << 16];
    for (;;) {
        const int n = gzread(f.get(), buf, sizeof buf);
        if (n < 0) throw IdxError("read error in " + path.string());
        if (n == 0) break;
        out.insert(out.end(), buf, buf + n);
    }
    return out;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off) {
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
           (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 Split split) {
    const auto img = read_all(images);
    const auto lab = read_all(labels);
    if (img.size() < 16) throw IdxError("truncated image header: " + images.string());
    if (lab.size() < 8) throw IdxError("truncated label header: " + labels.string());
    if (be32(img, 0) != 0x00000803) throw IdxError("bad image magic in " + images.string());
    if (be32(lab, 0) != 0x00000801) throw IdxError("bad label magic in " + labels.string());
    const std::size_t n = be32(img, 4), rows = be32(img, 8), cols = be32(img, 12);
    const std::size_t nl = be32(lab, 4);
    if (n != nl) {
        throw IdxError("count mismatch: " + std::to_string(n) + " images vs " + std::to_string(nl) + " labels");
    }
    if (n == 0 || rows == 0 || cols == 0) throw IdxError("empty IDX file: " + images.string());
    if (img.size() < 16 + n * rows * cols) throw IdxError("truncated image data: " + images.string());
    if (lab.size() < 8 + n) throw IdxError("truncated label data: " + labels.string());

    Dataset d;
    d.split = split;
    std::vector<double> px(n * rows * cols);
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = img[16 + i] / 255.0;
    d.inputs = Tensor({n, 1, rows, cols}, std::move(px));
    d.labels.resize(n);
    std::size_t max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        d.labels[i] = lab[8 + i];
        max_label = std::max(max_label, d.labels[i]);
    }
    d.classes = std::max<std::size_t>(max_label + 1, 10);
    return d;
}

Tensor synth_prototypes(const SynthConfig& cfg) {
    if (cfg.classes == 0 || cfg.side == 0) throw std::invalid_argument("gen_synth: empty config");
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> pos(0.5, static_cast<double>(cfg.side) - 1.5);
    std::uniform_real_distribution<double> width(0.8, 1.6);
    const std::size_t s = cfg.side;
    Tensor protos({cfg.classes, 1, s, s});
    for (std::size_t c = 0; c < cfg.classes; ++c) {
        auto img = protos.data().subspan(c * s * s, s * s);
        for (std::size_t b = 0; b < cfg.blobs; ++b) {
            const double cy = pos(rng), cx = pos(rng), sg = width(rng);
            for (std::size_t y = 0; y < s; ++y)
                for (std::size_t x = 0; x < s; ++x) {
                    const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
                    img[y * s + x] += std::exp(-(dy * dy + dx * dx) / (2.0 * sg * sg));
                }
        }
        const double mx = *std::max_element(img.begin(), img.end());
        for (auto& v : img) v /= mx;
    }
    return protos;
}

Dataset gen_synth(const SynthConfig& cfg, Split split) {
    if (cfg.n < cfg.classes) throw std::invalid_argument("gen_synth: n must be >= classes");
    const Tensor protos = synth_prototypes(cfg);
    const std::size_t len = cfg.side * cfg.side;
    Rng rng(cfg.seed + (split == Split::test ? 0x7e57ULL : 0ULL));
    std::normal_distribution<double> noise(0.0, 1.0);

    Dataset d;
    d.split = split;
    d.classes = cfg.classes;
    d.labels.resize(cfg.n);
    std::vector<double> px(cfg.n * len);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        const std::size_t c = i % cfg.classes;
        d.labels[i] = c;
        for (std::size_t j = 0; j < len; ++j) {
            const double v = protos[c * len + j] + (cfg.noise > 0.0 ? cfg.noise * noise(rng) : 0.0);
            px[i * len + j] = std::clamp(v, 0.0, 1.0);
        }
    }
    d.inputs = Tensor({cfg.n, 1, cfg.side, cfg.side}, std::move(px));
    return d;
}

}  // namespace gocom::data
