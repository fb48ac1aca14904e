#include "gocom/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

namespace gocom {

std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>{});
}

std::string shape_str(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

ShapeError::ShapeError(std::string_view primitive, const std::string& detail)
    : std::invalid_argument(std::string(primitive) + ": " + detail),
      primitive_(primitive) {}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(numel(shape_), fill) {
    for (auto d : shape_) {
        if (d == 0) throw ShapeError("tensor", "zero-sized dim in " + shape_str(shape_));
    }
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    for (auto d : shape_) {
        if (d == 0) throw ShapeError("tensor", "zero-sized dim in " + shape_str(shape_));
    }
    if (numel(shape_) != data_.size()) {
        throw ShapeError("tensor", "shape " + shape_str(shape_) + " holds " +
                                       std::to_string(numel(shape_)) + " values, got " +
                                       std::to_string(data_.size()));
    }
}

double Tensor::item() const {
    if (data_.size() != 1) throw ShapeError("item", "expected 1 element, shape " + shape_str(shape_));
    return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
    if (numel(shape) != data_.size()) {
        throw ShapeError("reshape", shape_str(shape_) + " -> " + shape_str(shape));
    }
    return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
    if (shape_.empty() || begin >= end || end > shape_[0]) {
        throw ShapeError("slice_rows", "rows [" + std::to_string(begin) + "," +
                                           std::to_string(end) + ") of " + shape_str(shape_));
    }
    const std::size_t row = data_.size() / shape_[0];
    Shape s = shape_;
    s[0] = end - begin;
    return Tensor(std::move(s), std::vector<double>(data_.begin() + begin * row,
                                                    data_.begin() + end * row));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor randn(Shape shape, Rng& rng, double stddev) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : t.data()) v = dist(rng);
    return t;
}

Tensor rand_uniform(Shape shape, Rng& rng, double lo, double hi) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : t.data()) v = dist(rng);
    return t;
}

Tensor stack(std::span<const Tensor> items) {
    if (items.empty()) throw ShapeError("stack", "no tensors");
    Shape s{items.size()};
    const Shape& inner = items[0].shape();
    s.insert(s.end(), inner.begin(), inner.end());
    std::vector<double> data;
    data.reserve(numel(s));
    for (const auto& t : items) {
        if (t.shape() != inner) {
            throw ShapeError("stack", shape_str(t.shape()) + " vs " + shape_str(inner));
        }
        data.insert(data.end(), t.vec().begin(), t.vec().end());
    }
    return Tensor(std::move(s), std::move(data));
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(base) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

bool bit_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() &&
           std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace gocom
