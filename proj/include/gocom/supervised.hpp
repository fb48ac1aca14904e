#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gocom/data.hpp"
#include "gocom/metrics.hpp"
#include "gocom/models.hpp"
#include "gocom/objective.hpp"
#include "gocom/optim.hpp"

namespace gocom::train {

/// SNR used for each training minibatch.
struct SnrPolicy {
    enum class Mode { fixed, uniform_range };

    Mode mode = Mode::fixed;
    channel::Snr fixed = channel::Snr::noiseless();
    double lo = 0.0;
    double hi = 0.0;

    static SnrPolicy at(channel::Snr snr) { return {Mode::fixed, snr}; }
    /// Throws when lo > hi.
    static SnrPolicy range(double lo, double hi);

    /// Fixed mode draws nothing from rng.
    channel::Snr sample(Rng& rng) const;
    std::string str() const;  // "10", "inf" or "-2:20"
};

struct TrainConfig {
    double alpha = 0.1;
    OptimizerConfig opt{};
    std::size_t batch = 64;
    std::size_t epochs = 10;
    SnrPolicy train_snr = SnrPolicy::range(-2.0, 20.0);
    channel::Kind channel = channel::Kind::awgn;
    bool freeze_task = false;
    std::uint64_t seed = 0;
};

/// Trains the task head on clean inputs (no channel) with cross-entropy and
/// returns a copy of the resulting parameters. Zero epochs leaves the head untouched.
ParamSet pretrain_task(models::TaskModel& task, const data::Dataset& train, const TrainConfig& cfg);

/// Channel-free accuracy of a classifier head.
double task_accuracy(models::TaskModel& task, const data::Dataset& data);

/// One minibatch of the joint objective: encode, transmit, demap, classify,
/// backpropagate (1 - alpha) L_task + alpha L_comm and update the encoder,
/// the demapper and (unless frozen) the task head. An identity head uses
/// MSE against x as its task loss. Returns the batch objective.
double train_step(models::GoeModel& goe, models::DemapperModel& demapper, models::TaskModel& task,
                  const Tensor& x, std::span<const std::size_t> labels, channel::Kind kind,
                  const channel::Snr& snr, const objective::ObjectiveConfig& obj,
                  const OptimizerConfig& opt, Rng& rng);

/// One reconstruction-only minibatch on the JSCC pair. Returns the batch MSE.
double jscc_step(models::JsccModel& jscc, const Tensor& x, channel::Kind kind,
                 const channel::Snr& snr, const OptimizerConfig& opt, Rng& rng);

struct TrainLog {
    std::vector<double> epoch_loss;
    std::vector<double> step_loss;
};

/// Shuffled epochs of train_step. Each batch draws, in order: its SNR from
/// the policy, then the channel realizations.
/// `max_steps` stops after that many minibatches (0 = run all epochs).
TrainLog train_gocom(models::GoeModel& goe, models::DemapperModel& demapper, models::TaskModel& task,
                     const data::Dataset& train, const TrainConfig& cfg, std::size_t max_steps = 0);

/// Same batching and randomness consumption as train_gocom, with jscc_step.
TrainLog train_jscc(models::JsccModel& jscc, const data::Dataset& train, const TrainConfig& cfg,
                    std::size_t max_steps = 0);

enum class System { gocom, jscc_task, upper };

struct SweepConfig {
    std::vector<channel::Snr> grid;
    std::size_t repeats = 10;
    channel::Kind channel = channel::Kind::awgn;
    std::uint64_t seed = 0;
    std::size_t eval_batch = 512;
};

/// Labels attached to every emitted row.
struct RowContext {
    std::string run_id;
    std::optional<double> alpha;
    std::string train_snr;
};

/// Models needed by a system. gocom uses goe/demapper/task; jscc_task uses
/// jscc plus task (the frozen pretrained head); upper uses task only.
struct SystemModels {
    models::GoeModel* goe = nullptr;
    models::DemapperModel* demapper = nullptr;
    models::TaskModel* task = nullptr;
    models::JsccModel* jscc = nullptr;
};

/// For each grid SNR, mean and std over `repeats` independent channel seeds
/// of the test accuracy (plus reconstruction PSNR for jscc_task). Rows come
/// out in grid order.
std::vector<MetricsRow> evaluate_sweep(System system, SystemModels models, const data::Dataset& test,
                                       const SweepConfig& cfg, const RowContext& ctx);

std::string_view system_name(System s);

}  // namespace gocom::train
