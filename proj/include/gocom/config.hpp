#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gocom/models.hpp"
#include "gocom/optim.hpp"
#include "gocom/rl.hpp"
#include "gocom/supervised.hpp"

namespace gocom {

enum class TaskKind { classify, rl };
enum class SystemKind { gocom, jscc, upper, random };

TaskKind parse_task(std::string_view s);
SystemKind parse_system(std::string_view s);
std::string_view task_name(TaskKind t);
std::string_view system_kind_name(SystemKind s);

/// Parse or validation failure. `line` is 0 when the problem is not tied to
/// a particular line (e.g. a command-line override).
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::size_t line, const std::string& key, const std::string& msg);
    std::size_t line;
    std::string key;
};

struct DataConfig {
    std::string source = "synth";  // synth | idx
    std::filesystem::path train_images, train_labels, test_images, test_labels;
    std::size_t max_train = 0;  // 0 keeps everything
    std::size_t max_test = 0;
    std::size_t synth_train = 2000;
    std::size_t synth_test = 1000;
    std::size_t synth_classes = 10;
    std::size_t synth_side = 8;
    std::size_t synth_blobs = 2;
    double synth_noise = 0.25;
};

struct ExperimentConfig {
    TaskKind task = TaskKind::classify;
    SystemKind system = SystemKind::gocom;
    std::uint64_t seed = 0;
    std::string run_id = "run";
    std::filesystem::path out = "out";

    DataConfig data;

    channel::Kind channel = channel::Kind::awgn;
    std::optional<train::SnrPolicy> train_snr;  // task-dependent default
    std::vector<channel::Snr> test_grid;        // default -2:20:2
    std::size_t repeats = 10;

    models::Rate rate;
    std::optional<bool> snr_conditioning;  // default: on for classify, off for rl
    std::string arch = "conv";  // conv | dense (classify only)
    std::size_t hidden = 256;   // dense encoder/demapper width
    std::size_t qnet_hidden = 128;
    std::optional<std::filesystem::path> task_checkpoint;

    double alpha = 0.1;
    bool freeze_task = false;

    // supervised
    std::size_t epochs = 10;
    std::size_t batch = 64;
    OptimizerConfig opt{OptRule::adam, 1e-4};
    std::size_t pretrain_epochs = 5;
    std::size_t jscc_epochs = 0;  // 0 = same as epochs

    // rl
    rl::DqnConfig dqn;
    std::size_t pretrain_steps = 50000;  // channel-free DQN producing the task head
    std::size_t eval_episodes = 100;
    rl::WarmStartConfig warm_start;

    train::SnrPolicy effective_train_snr() const;
    std::vector<channel::Snr> effective_grid() const;
    bool effective_snr_conditioning() const;
};

/// Grid syntax: "lo:hi:step" (inclusive) or a comma list; items may be "inf".
std::vector<channel::Snr> parse_snr_grid(std::string_view s);
/// "20", "inf" or a range "lo:hi".
train::SnrPolicy parse_train_snr(std::string_view s);

/// `[section]` headers, `key = value` lines, `#` or `;` comments.
/// Unknown sections/keys and repeated keys are errors.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Cross-field checks; throws ConfigError naming the offending key.
void validate(const ExperimentConfig& cfg);

}  // namespace gocom
