#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gocom/tensor.hpp"

namespace gocom {

/// One learnable tensor with its gradient and optimizer moment slots.
struct Param {
    Tensor value;
    Tensor grad;
    Tensor m;
    Tensor v;
};

/// Named parameter collection, iterated in name order.
class ParamSet {
public:
    using Map = std::map<std::string, Param>;

    /// Adds a new entry; throws on a duplicate name.
    Param& add(const std::string& name, Tensor value);

    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    bool contains(const std::string& name) const { return entries_.count(name) != 0; }

    std::size_t size() const noexcept { return entries_.size(); }
    /// Total number of scalar parameters.
    std::size_t count() const;
    std::vector<std::string> names() const;

    void zero_grad();

    /// Copies values only; optimizer state and gradients are left alone.
    void assign_values(const ParamSet& other);
    /// Value-only bitwise equality over identical name sets.
    bool values_bit_equal(const ParamSet& other) const;
    /// FNV-1a over names and value bytes, used for cheap change detection.
    std::uint64_t value_hash() const;

    std::uint64_t adam_steps() const noexcept { return adam_steps_; }
    void set_adam_steps(std::uint64_t t) noexcept { adam_steps_ = t; }

    Map::iterator begin() { return entries_.begin(); }
    Map::iterator end() { return entries_.end(); }
    Map::const_iterator begin() const { return entries_.begin(); }
    Map::const_iterator end() const { return entries_.end(); }

private:
    Map entries_;
    std::uint64_t adam_steps_ = 0;
};

}  // namespace gocom
