#include "gocom/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <tuple>

namespace gocom {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
    out << kMetricsHeader << "\n";
    for (const auto& r : rows) {
        out << csv_field(r.run_id) << ',' << csv_field(r.task) << ',' << csv_field(r.system) << ','
            << csv_field(r.channel) << ',' << (r.alpha ? format_double(*r.alpha) : "") << ','
            << csv_field(r.train_snr) << ',' << csv_field(r.test_snr_db) << ','
            << csv_field(r.metric) << ',' << format_double(r.value) << ','
            << format_double(r.std) << ',' << r.repeats << "\n";
    }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

double parse_double(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw std::invalid_argument("bad number in csv: " + s);
    return v;
}

double snr_key(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::numeric_limits<double>::infinity();
    return v;
}

}  // namespace

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader) {
        throw std::invalid_argument("metrics csv: missing or unexpected header");
    }
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 11) throw std::invalid_argument("metrics csv: expected 11 fields: " + line);
        MetricsRow r;
        r.run_id = f[0];
        r.task = f[1];
        r.system = f[2];
        r.channel = f[3];
        if (!f[4].empty()) r.alpha = parse_double(f[4]);
        r.train_snr = f[5];
        r.test_snr_db = f[6];
        r.metric = f[7];
        r.value = parse_double(f[8]);
        r.std = parse_double(f[9]);
        r.repeats = static_cast<std::size_t>(std::stoull(f[10]));
        rows.push_back(std::move(r));
    }
    return rows;
}

void sort_rows(std::vector<MetricsRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
        const double aa = a.alpha.value_or(-1.0), ba = b.alpha.value_or(-1.0);
        return std::make_tuple(a.system, aa, snr_key(a.test_snr_db)) <
               std::make_tuple(b.system, ba, snr_key(b.test_snr_db));
    });
}

MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd r;
    if (xs.empty()) return r;
    if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) {
        r.mean = xs.front();
        return r;
    }
    for (double x : xs) r.mean += x;
    r.mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return r;
    double acc = 0.0;
    for (double x : xs) acc += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(acc / static_cast<double>(xs.size() - 1));
    return r;
}

}  // namespace gocom
