#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gocom/tape.hpp"
#include "gocom/tensor.hpp"

namespace gocom::channel {

enum class Kind { awgn, slow_fading };

Kind parse_kind(std::string_view s);  // "awgn", "rayleigh" / "slow_fading"
std::string_view kind_name(Kind k);

/// Signal-to-noise ratio in dB, or the noiseless sentinel.
class Snr {
public:
    static Snr db(double value);
    static Snr noiseless() { return Snr(); }
    /// Accepts a number or "inf".
    static Snr parse(std::string_view s);

    bool is_noiseless() const noexcept { return noiseless_; }
    /// Throws for the noiseless sentinel.
    double value_db() const;
    /// 10^(-dB/10) at unit signal power; 0 for the sentinel.
    double noise_power() const;
    std::string str() const;

    friend bool operator==(const Snr&, const Snr&) = default;

private:
    Snr() = default;
    double db_ = 0.0;
    bool noiseless_ = true;
};

double snr_to_noise_power(double snr_db);

struct ChannelConfig {
    Kind kind = Kind::awgn;
    Snr snr = Snr::noiseless();
    std::uint64_t seed = 0;
};

/// s complex symbols stored interleaved (re0, im0, re1, im1, ...).
struct ComplexBlock {
    std::size_t symbols = 0;
    std::vector<double> data;

    std::complex<double> at(std::size_t i) const { return {data[2 * i], data[2 * i + 1]}; }
    /// (1/s) * sum |z_i|^2.
    double mean_power() const;
};

/// raw / sqrt(mean symbol power). Throws std::domain_error("zero-power signal").
ComplexBlock normalize_power(std::span<const double> raw, std::size_t symbols);

/// One sampled channel use for one block.
struct Realization {
    std::complex<double> gain{1.0, 0.0};  // block-constant; 1 for AWGN
    ComplexBlock noise;                   // n before equalization
    std::size_t redraws = 0;              // gains rejected for |c| < 1e-12
};

Realization sample_realization(Kind kind, double noise_power, std::size_t symbols, Rng& rng);

/// Equalized receive signal z + n / c, i.e. (c z + n) / c under perfect CSI.
ComplexBlock apply(const ComplexBlock& z, const Realization& r);

struct Transmission {
    ComplexBlock received;
    Realization realization;
};

Transmission transmit(const ComplexBlock& z, const ChannelConfig& cfg, Rng& rng);

/// Batched differentiable channel on z [N, 2s]: one realization per row.
/// The sampled perturbation enters as a constant, so d(z_hat)/dz = I.
Var transmit(Var z, Kind kind, const Snr& snr, Rng& rng,
             std::vector<Realization>* realizations = nullptr);

/// Replays previously sampled realizations (for frozen-noise checks).
Var apply(Var z, std::span<const Realization> realizations);

}  // namespace gocom::channel
