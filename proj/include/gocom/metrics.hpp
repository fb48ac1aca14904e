#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gocom {

/// One evaluation point of one metric.
struct MetricsRow {
    std::string run_id;
    std::string task;     // classify | rl
    std::string system;   // gocom | jscc | upper | random
    std::string channel;  // awgn | rayleigh | none
    std::optional<double> alpha;
    std::string train_snr;    // "10", "-2:20", "inf" or "none"
    std::string test_snr_db;  // number, "inf" or "none"
    std::string metric;       // accuracy | psnr_db | reward_mean | reward_std
    double value = 0.0;
    double std = 0.0;
    std::size_t repeats = 0;
};

inline constexpr const char* kMetricsHeader =
    "run_id,task,system,channel,alpha,train_snr,test_snr_db,metric,value,std,repeats";

/// Shortest round-trip decimal form.
std::string format_double(double v);

/// RFC 4180 quoting for a single field.
std::string csv_field(const std::string& s);

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(std::istream& in);

/// Orders rows by (system, alpha, test_snr_db), numeric where possible with
/// "inf" after every finite SNR. Stable for ties.
void sort_rows(std::vector<MetricsRow>& rows);

/// Sample mean and standard deviation (n - 1 denominator; 0 for n < 2).
struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};
MeanStd mean_std(const std::vector<double>& xs);

}  // namespace gocom
