#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gocom {

using Rng = std::mt19937_64;
using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Raised when a primitive receives operands of incompatible shape. The
/// message always names the primitive and the offending dims.
class ShapeError : public std::invalid_argument {
public:
    ShapeError(std::string_view primitive, const std::string& detail);

    const std::string& primitive() const noexcept { return primitive_; }

private:
    std::string primitive_;
};

/// Dense row-major array of doubles.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double>& vec() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    /// Value of a single-element tensor.
    double item() const;

    Tensor reshaped(Shape shape) const;
    bool all_finite() const;

    /// Rows [begin, end) along the leading axis.
    Tensor slice_rows(std::size_t begin, std::size_t end) const;

    void fill(double v);

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// i.i.d. Normal(0, stddev) entries.
Tensor randn(Shape shape, Rng& rng, double stddev = 1.0);
/// i.i.d. Uniform(lo, hi) entries.
Tensor rand_uniform(Shape shape, Rng& rng, double lo, double hi);

/// Stack equally-shaped tensors along a new leading axis.
Tensor stack(std::span<const Tensor> items);

/// Deterministic child seed (splitmix64 over the inputs).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// Bitwise comparison, distinguishing -0.0 from +0.0 and NaN payloads.
bool bit_equal(const Tensor& a, const Tensor& b);

}  // namespace gocom
