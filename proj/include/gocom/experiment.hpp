#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gocom/config.hpp"
#include "gocom/metrics.hpp"

namespace gocom {

/// Plain-text run log; every line is prefixed with a wall-clock timestamp,
/// so log files are excluded from byte-level reproducibility.
class RunLog {
public:
    explicit RunLog(const std::filesystem::path& path, bool echo = false);
    void line(const std::string& msg);

private:
    std::ofstream out_;
    bool echo_;
};

// Artifact names inside the output directory.
inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kLogFile = "log.txt";
inline constexpr const char* kTaskPreCkpt = "task_pre.ckpt";
inline constexpr const char* kGoeCkpt = "goe.ckpt";
inline constexpr const char* kDemapperCkpt = "demapper.ckpt";
inline constexpr const char* kTaskCkpt = "task.ckpt";
inline constexpr const char* kJsccEncoderCkpt = "jscc_encoder.ckpt";
inline constexpr const char* kJsccDecoderCkpt = "jscc_decoder.ckpt";

/// Pretrains the task head (classifier on clean data, or a channel-free DQN)
/// and saves it as task_pre.ckpt. Returns the checkpoint path.
std::filesystem::path run_pretrain(const ExperimentConfig& cfg, RunLog& log);

/// Full pipeline for cfg.system: obtain the pretrained head (from
/// model.task_checkpoint or by pretraining), train, save checkpoints, and
/// evaluate over the test grid. Writes metrics.csv and returns its rows.
std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg, RunLog& log);

/// Evaluates previously saved checkpoints in cfg.out without training.
std::vector<MetricsRow> run_eval(const ExperimentConfig& cfg, RunLog& log);

/// Runs the baselines for the task (classify: jscc and upper; rl: random and
/// upper) into per-system subdirectories and merges their rows.
std::vector<MetricsRow> run_baselines(const ExperimentConfig& cfg, RunLog& log);

enum class SweepAxis { alpha, snr };
SweepAxis parse_axis(std::string_view s);

/// One full run per value in cfg.out/<run_id>/, then a merged, sorted
/// metrics.csv in cfg.out. If a run throws, the rows gathered so far are
/// still written and the error is rethrown.
std::vector<MetricsRow> run_sweep(const ExperimentConfig& base, SweepAxis axis,
                                  const std::vector<std::string>& values, RunLog& log);

void write_metrics_file(const std::filesystem::path& path, std::vector<MetricsRow> rows);

}  // namespace gocom
