#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "gocom/params.hpp"

namespace gocom {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Binary layout, little-endian throughout:
///   "GOCM", u32 version,
///   per parameter (name order): u32 name length, name bytes, u32 rank,
///   rank x u32 dims, f64 values,
///   u32 CRC-32 of every preceding byte.
std::vector<std::uint8_t> encode_checkpoint(const ParamSet& params);

/// Validates magic, version, structure and CRC before building anything.
ParamSet decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const ParamSet& params, const std::filesystem::path& path);
ParamSet load_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint values into `into`; names and shapes must match exactly.
void restore_values(ParamSet& into, const ParamSet& from, const std::string& what);

}  // namespace gocom
