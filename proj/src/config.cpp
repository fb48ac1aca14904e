#include "gocom/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace gocom {

TaskKind parse_task(std::string_view s) {
    if (s == "classify") return TaskKind::classify;
    if (s == "rl") return TaskKind::rl;
    throw std::invalid_argument("unknown task '" + std::string(s) + "' (classify|rl)");
}

SystemKind parse_system(std::string_view s) {
    if (s == "gocom") return SystemKind::gocom;
    if (s == "jscc") return SystemKind::jscc;
    if (s == "upper") return SystemKind::upper;
    if (s == "random") return SystemKind::random;
    throw std::invalid_argument("unknown system '" + std::string(s) + "' (gocom|jscc|upper|random)");
}

std::string_view task_name(TaskKind t) { return t == TaskKind::classify ? "classify" : "rl"; }

std::string_view system_kind_name(SystemKind s) {
    switch (s) {
        case SystemKind::gocom: return "gocom";
        case SystemKind::jscc: return "jscc";
        case SystemKind::upper: return "upper";
        case SystemKind::random: return "random";
    }
    return "unknown";
}

ConfigError::ConfigError(std::size_t line_, const std::string& key_, const std::string& msg)
    : std::runtime_error((line_ ? "line " + std::to_string(line_) + ": " : std::string()) +
                         (key_.empty() ? "" : "'" + key_ + "': ") + msg),
      line(line_),
      key(key_) {}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double to_double(std::string_view s) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw std::invalid_argument("expected a number, got '" + std::string(s) + "'");
    return v;
}

std::uint64_t to_u64(std::string_view s) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
        throw std::invalid_argument("expected a non-negative integer, got '" + std::string(s) + "'");
    }
    return v;
}

bool to_bool(std::string_view s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::invalid_argument("expected true or false, got '" + std::string(s) + "'");
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t b = 0;
    for (;;) {
        const auto e = s.find(sep, b);
        out.push_back(trim(s.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b)));
        if (e == std::string_view::npos) break;
        b = e + 1;
    }
    return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    auto sz = [](std::size_t ExperimentConfig::*m) {
        return Setter([m](ExperimentConfig& c, const std::string& v) { c.*m = to_u64(v); });
    };
    auto dsz = [](std::size_t DataConfig::*m) {
        return Setter([m](ExperimentConfig& c, const std::string& v) { c.data.*m = to_u64(v); });
    };
    auto path = [](std::filesystem::path DataConfig::*m) {
        return Setter([m](ExperimentConfig& c, const std::string& v) { c.data.*m = v; });
    };
    auto rsz = [](std::size_t rl::DqnConfig::*m) {
        return Setter([m](ExperimentConfig& c, const std::string& v) { c.dqn.*m = to_u64(v); });
    };
    auto rdbl = [](double rl::DqnConfig::*m) {
        return Setter([m](ExperimentConfig& c, const std::string& v) { c.dqn.*m = to_double(v); });
    };
    static const std::map<std::string, Setter> table = {
        {"experiment.task", [](auto& c, auto& v) { c.task = parse_task(v); }},
        {"experiment.system", [](auto& c, auto& v) { c.system = parse_system(v); }},
        {"experiment.seed", [](auto& c, auto& v) { c.seed = to_u64(v); }},
        {"experiment.run_id", [](auto& c, auto& v) {
             if (v.empty()) throw std::invalid_argument("run_id must not be empty");
             c.run_id = v;
         }},
        {"experiment.out", [](auto& c, auto& v) { c.out = v; }},

        {"data.source", [](auto& c, auto& v) {
             if (v != "synth" && v != "idx") throw std::invalid_argument("source must be synth or idx");
             c.data.source = v;
         }},
        {"data.train_images", path(&DataConfig::train_images)},
        {"data.train_labels", path(&DataConfig::train_labels)},
        {"data.test_images", path(&DataConfig::test_images)},
        {"data.test_labels", path(&DataConfig::test_labels)},
        {"data.max_train", dsz(&DataConfig::max_train)},
        {"data.max_test", dsz(&DataConfig::max_test)},
        {"data.synth_train", dsz(&DataConfig::synth_train)},
        {"data.synth_test", dsz(&DataConfig::synth_test)},
        {"data.synth_classes", dsz(&DataConfig::synth_classes)},
        {"data.synth_side", dsz(&DataConfig::synth_side)},
        {"data.synth_blobs", dsz(&DataConfig::synth_blobs)},
        {"data.synth_noise", [](auto& c, auto& v) { c.data.synth_noise = to_double(v); }},

        {"channel.kind", [](auto& c, auto& v) { c.channel = channel::parse_kind(v); }},
        {"channel.train_snr", [](auto& c, auto& v) { c.train_snr = parse_train_snr(v); }},
        {"channel.test_snr", [](auto& c, auto& v) { c.test_grid = parse_snr_grid(v); }},
        {"channel.repeats", sz(&ExperimentConfig::repeats)},

        {"model.rate", [](auto& c, auto& v) { c.rate = models::Rate::parse(v); }},
        {"model.snr_conditioning", [](auto& c, auto& v) { c.snr_conditioning = to_bool(v); }},
        {"model.arch", [](auto& c, auto& v) {
             if (v != "conv" && v != "dense") throw std::invalid_argument("arch must be conv or dense");
             c.arch = v;
         }},
        {"model.hidden", sz(&ExperimentConfig::hidden)},
        {"model.qnet_hidden", sz(&ExperimentConfig::qnet_hidden)},
        {"model.task_checkpoint", [](auto& c, auto& v) { c.task_checkpoint = std::filesystem::path(v); }},
        {"model.alpha", [](auto& c, auto& v) { c.alpha = to_double(v); }},
        {"model.freeze_task", [](auto& c, auto& v) { c.freeze_task = to_bool(v); }},

        {"train.epochs", sz(&ExperimentConfig::epochs)},
        {"train.batch", sz(&ExperimentConfig::batch)},
        {"train.lr", [](auto& c, auto& v) { c.opt.lr = to_double(v); }},
        {"train.optimizer", [](auto& c, auto& v) { c.opt.rule = parse_opt_rule(v); }},
        {"train.pretrain_epochs", sz(&ExperimentConfig::pretrain_epochs)},
        {"train.jscc_epochs", sz(&ExperimentConfig::jscc_epochs)},

        {"rl.gamma", rdbl(&rl::DqnConfig::gamma)},
        {"rl.eps_start", rdbl(&rl::DqnConfig::eps_start)},
        {"rl.eps_end", rdbl(&rl::DqnConfig::eps_end)},
        {"rl.eps_decay_steps", rsz(&rl::DqnConfig::eps_decay_steps)},
        {"rl.sync_every", rsz(&rl::DqnConfig::sync_every)},
        {"rl.capacity", rsz(&rl::DqnConfig::capacity)},
        {"rl.batch", rsz(&rl::DqnConfig::batch)},
        {"rl.lr", [](auto& c, auto& v) { c.dqn.opt.lr = to_double(v); }},
        {"rl.optimizer", [](auto& c, auto& v) { c.dqn.opt.rule = parse_opt_rule(v); }},
        {"rl.total_steps", rsz(&rl::DqnConfig::total_steps)},
        {"rl.learn_start", rsz(&rl::DqnConfig::learn_start)},
        {"rl.train_every", rsz(&rl::DqnConfig::train_every)},
        {"rl.huber_delta", rdbl(&rl::DqnConfig::huber_delta)},
        {"rl.pretrain_steps", sz(&ExperimentConfig::pretrain_steps)},
        {"rl.eval_episodes", sz(&ExperimentConfig::eval_episodes)},
        {"rl.warmstart_steps", [](auto& c, auto& v) { c.warm_start.steps = to_u64(v); }},
        {"rl.warmstart_observations", [](auto& c, auto& v) { c.warm_start.observations = to_u64(v); }},
        {"rl.warmstart_lr", [](auto& c, auto& v) { c.warm_start.opt.lr = to_double(v); }},
    };
    return table;
}

const std::set<std::string>& sections() {
    static const std::set<std::string> s = {"experiment", "data", "channel", "model", "train", "rl"};
    return s;
}

}  // namespace

std::vector<channel::Snr> parse_snr_grid(std::string_view s) {
    std::vector<channel::Snr> out;
    const auto t = trim(s);
    if (t.find(':') != std::string::npos) {
        const auto parts = split(t, ':');
        if (parts.size() != 3) throw std::invalid_argument("grid range must be lo:hi:step");
        const double lo = to_double(parts[0]), hi = to_double(parts[1]), step = to_double(parts[2]);
        if (!(step > 0.0) || !(lo <= hi)) throw std::invalid_argument("grid range needs lo <= hi and step > 0");
        const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
        for (std::size_t i = 0; i < n; ++i) out.push_back(channel::Snr::db(lo + static_cast<double>(i) * step));
    } else {
        for (const auto& item : split(t, ',')) out.push_back(channel::Snr::parse(item));
    }
    if (out.empty()) throw std::invalid_argument("empty SNR grid");
    return out;
}

train::SnrPolicy parse_train_snr(std::string_view s) {
    const auto t = trim(s);
    if (t.find(':') != std::string::npos) {
        const auto parts = split(t, ':');
        if (parts.size() != 2) throw std::invalid_argument("train SNR range must be lo:hi");
        return train::SnrPolicy::range(to_double(parts[0]), to_double(parts[1]));
    }
    return train::SnrPolicy::at(channel::Snr::parse(t));
}

train::SnrPolicy ExperimentConfig::effective_train_snr() const {
    if (train_snr) return *train_snr;
    return task == TaskKind::rl ? train::SnrPolicy::at(channel::Snr::db(20.0)) : train::SnrPolicy::range(-2.0, 20.0);
}

std::vector<channel::Snr> ExperimentConfig::effective_grid() const {
    return test_grid.empty() ? parse_snr_grid("-2:20:2") : test_grid;
}

bool ExperimentConfig::effective_snr_conditioning() const {
    return snr_conditioning.value_or(task == TaskKind::classify);
}

ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig cfg;
    std::string section;
    std::set<std::string> seen;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(lineno, "", "malformed section header");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (!sections().count(section)) throw ConfigError(lineno, section, "unknown section");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(lineno, "", "expected key = value");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (section.empty()) throw ConfigError(lineno, key, "key outside of any section");
        const std::string full = section + "." + key;
        const auto& table = setters();
        const auto it = table.find(full);
        if (it == table.end()) throw ConfigError(lineno, full, "unknown key");
        if (!seen.insert(full).second) throw ConfigError(lineno, full, "key given twice");
        try {
            it->second(cfg, value);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(lineno, full, e.what());
        }
    }
    validate(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError(0, "", "cannot open config " + path.string());
    return parse_config(f);
}

void validate(const ExperimentConfig& c) {
    auto fail = [](const std::string& key, const std::string& msg) { throw ConfigError(0, key, msg); };
    if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) fail("model.alpha", "must lie in [0, 1]");
    if (c.repeats == 0) fail("channel.repeats", "must be >= 1");
    if (c.task == TaskKind::classify) {
        if (c.system == SystemKind::random) fail("experiment.system", "random is only defined for the rl task");
        if (c.batch == 0) fail("train.batch", "must be >= 1");
        if (!(c.opt.lr > 0.0)) fail("train.lr", "must be positive");
        if (c.data.source == "idx") {
            for (const auto& [k, p] : {std::pair{"data.train_images", c.data.train_images},
                                       {"data.train_labels", c.data.train_labels},
                                       {"data.test_images", c.data.test_images},
                                       {"data.test_labels", c.data.test_labels}}) {
                if (p.empty()) fail(k, "required when source = idx");
            }
        } else {
            if (c.data.synth_classes < 2) fail("data.synth_classes", "must be >= 2");
            if (c.data.synth_train < c.data.synth_classes) fail("data.synth_train", "must be >= synth_classes");
            if (c.data.synth_test < c.data.synth_classes) fail("data.synth_test", "must be >= synth_classes");
            if (c.data.synth_side == 0 || c.data.synth_side % 4 != 0) {
                if (c.arch == "conv") fail("data.synth_side", "conv arch needs a multiple of 4");
            }
            if (c.data.synth_noise < 0.0) fail("data.synth_noise", "must be >= 0");
        }
    } else {
        const auto& d = c.dqn;
        if (!(d.gamma >= 0.0 && d.gamma <= 1.0)) fail("rl.gamma", "must lie in [0, 1]");
        if (!(d.eps_start >= 0.0 && d.eps_start <= 1.0)) fail("rl.eps_start", "must lie in [0, 1]");
        if (!(d.eps_end >= 0.0 && d.eps_end <= 1.0)) fail("rl.eps_end", "must lie in [0, 1]");
        if (d.sync_every == 0) fail("rl.sync_every", "must be >= 1");
        if (d.train_every == 0) fail("rl.train_every", "must be >= 1");
        if (d.capacity == 0) fail("rl.capacity", "must be >= 1");
        if (d.batch == 0 || d.batch > d.capacity) fail("rl.batch", "must be in [1, capacity]");
        if (!(d.opt.lr > 0.0)) fail("rl.lr", "must be positive");
        if (!(d.huber_delta > 0.0)) fail("rl.huber_delta", "must be positive");
        if (c.eval_episodes == 0) fail("rl.eval_episodes", "must be >= 1");
        if (c.warm_start.steps > 0 && c.warm_start.observations == 0) fail("rl.warmstart_observations", "must be >= 1");
        if (!(c.warm_start.opt.lr > 0.0)) fail("rl.warmstart_lr", "must be positive");
        if (c.effective_train_snr().mode != train::SnrPolicy::Mode::fixed) {
            fail("channel.train_snr", "rl training uses a fixed SNR");
        }
        if (c.system == SystemKind::jscc) fail("experiment.system", "jscc is only defined for the classify task");
    }
}

}  // namespace gocom
