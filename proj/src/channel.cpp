#include "gocom/channel.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

#include "gocom/ops.hpp"

namespace gocom::channel {

Kind parse_kind(std::string_view s) {
    if (s == "awgn") return Kind::awgn;
    if (s == "rayleigh" || s == "slow_fading") return Kind::slow_fading;
    throw std::invalid_argument("unknown channel kind: " + std::string(s));
}

std::string_view kind_name(Kind k) { return k == Kind::awgn ? "awgn" : "rayleigh"; }

Snr Snr::db(double value) {
    if (!std::isfinite(value)) throw std::invalid_argument("snr_db must be finite");
    Snr s;
    s.db_ = value;
    s.noiseless_ = false;
    return s;
}

Snr Snr::parse(std::string_view s) {
    if (s == "inf" || s == "+inf") return noiseless();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw std::invalid_argument("bad SNR value: " + std::string(s));
    }
    return db(v);
}

double Snr::value_db() const {
    if (noiseless_) throw std::logic_error("noiseless channel has no finite SNR");
    return db_;
}

double Snr::noise_power() const { return noiseless_ ? 0.0 : snr_to_noise_power(db_); }

std::string Snr::str() const {
    if (noiseless_) return "inf";
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, db_);
    return std::string(buf, ptr);
}

double snr_to_noise_power(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

double ComplexBlock::mean_power() const {
    double acc = 0.0;
    for (double v : data) acc += v * v;
    return acc / static_cast<double>(symbols);
}

ComplexBlock normalize_power(std::span<const double> raw, std::size_t symbols) {
    if (symbols == 0 || raw.size() != 2 * symbols) {
        throw ShapeError("normalize_power", std::to_string(raw.size()) + " reals for " +
                                                std::to_string(symbols) + " symbols");
    }
    double acc = 0.0;
    for (double v : raw) acc += v * v;
    if (acc == 0.0) throw std::domain_error("zero-power signal");
    const double inv = 1.0 / std::sqrt(acc / static_cast<double>(symbols));
    ComplexBlock out{symbols, std::vector<double>(raw.begin(), raw.end())};
    for (auto& v : out.data) v *= inv;
    return out;
}

Realization sample_realization(Kind kind, double noise_power, std::size_t symbols, Rng& rng) {
    Realization r;
    if (kind == Kind::slow_fading) {
        std::normal_distribution<double> g(0.0, std::sqrt(0.5));
        for (;;) {
            const double re = g(rng);
            const double im = g(rng);
            r.gain = {re, im};
            if (std::abs(r.gain) >= 1e-12) break;
            ++r.redraws;
        }
    }
    r.noise = ComplexBlock{symbols, std::vector<double>(2 * symbols, 0.0)};
    if (noise_power > 0.0) {
        std::normal_distribution<double> n(0.0, std::sqrt(noise_power / 2.0));
        for (auto& v : r.noise.data) v = n(rng);
    }
    return r;
}

namespace {

// n / c written into out (interleaved).
void equalized_noise(const Realization& r, std::span<double> out) {
    const bool unit_gain = r.gain == std::complex<double>(1.0, 0.0);
    for (std::size_t i = 0; i < r.noise.symbols; ++i) {
        std::complex<double> v = r.noise.at(i);
        if (!unit_gain) v /= r.gain;
        out[2 * i] = v.real();
        out[2 * i + 1] = v.imag();
    }
}

}  // namespace

ComplexBlock apply(const ComplexBlock& z, const Realization& r) {
    if (r.noise.symbols != z.symbols) {
        throw ShapeError("channel", std::to_string(z.symbols) + " symbols vs realization of " +
                                        std::to_string(r.noise.symbols));
    }
    std::vector<double> eff(z.data.size());
    equalized_noise(r, eff);
    ComplexBlock out = z;
    for (std::size_t i = 0; i < eff.size(); ++i) out.data[i] += eff[i];
    return out;
}

Transmission transmit(const ComplexBlock& z, const ChannelConfig& cfg, Rng& rng) {
    Realization r = sample_realization(cfg.kind, cfg.snr.noise_power(), z.symbols, rng);
    ComplexBlock out = apply(z, r);
    return {std::move(out), std::move(r)};
}

Var transmit(Var z, Kind kind, const Snr& snr, Rng& rng, std::vector<Realization>* realizations) {
    const auto& s = z.shape();
    if (s.size() != 2 || s[1] % 2 != 0) throw ShapeError("transmit", "needs [N, 2s], got " + shape_str(s));
    std::vector<Realization> rs;
    rs.reserve(s[0]);
    for (std::size_t i = 0; i < s[0]; ++i) {
        rs.push_back(sample_realization(kind, snr.noise_power(), s[1] / 2, rng));
    }
    Var out = channel::apply(z, std::span<const Realization>(rs));
    if (realizations) *realizations = std::move(rs);
    return out;
}

Var apply(Var z, std::span<const Realization> realizations) {
    const auto& s = z.shape();
    if (s.size() != 2 || s[0] != realizations.size()) {
        throw ShapeError("transmit", shape_str(s) + " with " +
                                         std::to_string(realizations.size()) + " realizations");
    }
    const std::size_t len = s[1];
    Tensor eff(s);
    for (std::size_t i = 0; i < s[0]; ++i) {
        if (realizations[i].noise.symbols * 2 != len) {
            throw ShapeError("transmit", "realization length mismatch");
        }
        equalized_noise(realizations[i], eff.data().subspan(i * len, len));
    }
    return add(z, z.tape->constant(std::move(eff)));
}

}  // namespace gocom::channel
