#include "gocom/params.hpp"

#include <cstring>
#include <stdexcept>

namespace gocom {

Param& ParamSet::add(const std::string& name, Tensor value) {
    if (entries_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    const Shape s = value.shape();
    Param p{std::move(value), Tensor(s), Tensor(s), Tensor(s)};
    return entries_.emplace(name, std::move(p)).first->second;
}

Param& ParamSet::at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
}

const Param& ParamSet::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
}

std::size_t ParamSet::count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : entries_) n += p.value.size();
    return n;
}

std::vector<std::string> ParamSet::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, _] : entries_) out.push_back(name);
    return out;
}

void ParamSet::zero_grad() {
    for (auto& [_, p] : entries_) p.grad.fill(0.0);
}

void ParamSet::assign_values(const ParamSet& other) {
    if (other.size() != size()) throw std::invalid_argument("assign_values: parameter sets differ");
    for (auto& [name, p] : entries_) {
        const Param& src = other.at(name);
        if (src.value.shape() != p.value.shape()) {
            throw ShapeError("assign_values", name + " " + shape_str(src.value.shape()) +
                                                  " vs " + shape_str(p.value.shape()));
        }
        p.value = src.value;
    }
}

bool ParamSet::values_bit_equal(const ParamSet& other) const {
    if (other.size() != size()) return false;
    for (const auto& [name, p] : entries_) {
        if (!other.contains(name) || !bit_equal(p.value, other.at(name).value)) return false;
    }
    return true;
}

std::uint64_t ParamSet::value_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* bytes, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(bytes);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ULL;
        }
    };
    for (const auto& [name, p] : entries_) {
        mix(name.data(), name.size());
        mix(p.value.data().data(), p.value.size() * sizeof(double));
    }
    return h;
}

}  // namespace gocom
