#include "gocom/supervised.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace gocom::train {

using models::DemapperModel;
using models::GoeModel;
using models::HeadKind;
using models::JsccModel;
using models::TaskModel;

SnrPolicy SnrPolicy::range(double lo, double hi) {
    if (!(lo <= hi)) throw std::invalid_argument("SNR range needs lo <= hi");
    SnrPolicy p;
    p.mode = Mode::uniform_range;
    p.lo = lo;
    p.hi = hi;
    return p;
}

channel::Snr SnrPolicy::sample(Rng& rng) const {
    if (mode == Mode::fixed) return fixed;
    std::uniform_real_distribution<double> d(lo, hi);
    return channel::Snr::db(d(rng));
}

std::string SnrPolicy::str() const {
    if (mode == Mode::fixed) return fixed.str();
    return format_double(lo) + ":" + format_double(hi);
}

namespace {

// Minibatch index lists for one shuffled epoch.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch, Rng& rng) {
    if (batch == 0) throw std::invalid_argument("batch size must be >= 1");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t b = 0; b < n; b += batch) {
        out.emplace_back(order.begin() + b, order.begin() + std::min(n, b + batch));
    }
    return out;
}

bool has_params(const TaskModel& t) { return t.kind != HeadKind::identity && t.net.params().size() > 0; }

Tensor forward_eval_task(TaskModel& task, const Tensor& w) {
    Tape tape;
    return task.forward(tape, tape.constant(w), false).value();
}

}  // namespace

ParamSet pretrain_task(TaskModel& task, const data::Dataset& train, const TrainConfig& cfg) {
    if (task.kind != HeadKind::classifier) throw std::invalid_argument("pretrain_task needs a classifier head");
    Rng rng(derive_seed(cfg.seed, 0x9e7));
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        for (const auto& idx : epoch_batches(train.size(), cfg.batch, rng)) {
            Tape tape;
            Var x = tape.constant(train.gather(idx));
            const auto labels = train.gather_labels(idx);
            Var loss = softmax_cross_entropy(task.net.forward(tape, x, 0.0, true), labels);
            tape.backward(loss);
            opt_step(task.net.params(), cfg.opt);
        }
    }
    return task.net.params();
}

double task_accuracy(TaskModel& task, const data::Dataset& d) {
    std::vector<std::size_t> all(d.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::size_t hits = 0;
    constexpr std::size_t chunk = 512;
    for (std::size_t b = 0; b < d.size(); b += chunk) {
        std::span<const std::size_t> idx(all.data() + b, std::min(chunk, d.size() - b));
        const auto labels = d.gather_labels(idx);
        const double acc = objective::accuracy(forward_eval_task(task, d.gather(idx)), labels);
        hits += static_cast<std::size_t>(std::llround(acc * static_cast<double>(idx.size())));
    }
    return static_cast<double>(hits) / static_cast<double>(d.size());
}

double train_step(GoeModel& goe, DemapperModel& demapper, TaskModel& task, const Tensor& x_batch,
                  std::span<const std::size_t> labels, channel::Kind kind, const channel::Snr& snr,
                  const objective::ObjectiveConfig& obj, const OptimizerConfig& opt, Rng& rng) {
    Tape tape;
    Var x = tape.constant(x_batch);
    auto c = models::compose(tape, goe, kind, snr, demapper, task, x, rng, true);
    Var l_task = task.kind == HeadKind::identity ? mse(c.y_hat, x)
                                                 : softmax_cross_entropy(c.y_hat, labels);
    Var l_comm = objective::comm_loss(x, c.w);
    Var loss = objective::combined_loss(l_task, l_comm, obj.alpha);
    tape.backward(loss);
    opt_step(goe.net.params(), opt);
    opt_step(demapper.net.params(), opt);
    if (!task.frozen && has_params(task)) opt_step(task.net.params(), opt);
    return loss.value().item();
}

double jscc_step(JsccModel& jscc, const Tensor& x_batch, channel::Kind kind, const channel::Snr& snr,
                 const OptimizerConfig& opt, Rng& rng) {
    Tape tape;
    Var x = tape.constant(x_batch);
    Var z = jscc.encoder.encode(tape, x, snr, true);
    Var z_hat = channel::transmit(z, kind, snr, rng);
    Var x_hat = jscc.decoder.demap(tape, z_hat, snr, true);
    Var loss = objective::comm_loss(x, x_hat);
    tape.backward(loss);
    opt_step(jscc.encoder.net.params(), opt);
    opt_step(jscc.decoder.net.params(), opt);
    return loss.value().item();
}

namespace {

template <typename StepFn>
TrainLog run_epochs(const data::Dataset& train, const TrainConfig& cfg, std::size_t max_steps,
                    StepFn&& step) {
    Rng rng(derive_seed(cfg.seed, 0x7a1));
    TrainLog log;
    std::size_t steps = 0;
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        double acc = 0.0;
        std::size_t nb = 0;
        for (const auto& idx : epoch_batches(train.size(), cfg.batch, rng)) {
            if (max_steps && steps == max_steps) break;
            const channel::Snr snr = cfg.train_snr.sample(rng);
            const double l = step(train.gather(idx), train.gather_labels(idx), snr, rng);
            log.step_loss.push_back(l);
            acc += l;
            ++nb;
            ++steps;
        }
        if (nb) log.epoch_loss.push_back(acc / static_cast<double>(nb));
        if (max_steps && steps == max_steps) break;
    }
    return log;
}

}  // namespace

TrainLog train_gocom(GoeModel& goe, DemapperModel& demapper, TaskModel& task,
                     const data::Dataset& train, const TrainConfig& cfg, std::size_t max_steps) {
    task.frozen = task.frozen || cfg.freeze_task;
    const objective::ObjectiveConfig obj{cfg.alpha, objective::TaskLoss::cross_entropy};
    objective::check_alpha(cfg.alpha);
    return run_epochs(train, cfg, max_steps,
                      [&](const Tensor& x, const std::vector<std::size_t>& y,
                          const channel::Snr& snr, Rng& rng) {
                          return train_step(goe, demapper, task, x, y, cfg.channel, snr, obj,
                                            cfg.opt, rng);
                      });
}

TrainLog train_jscc(JsccModel& jscc, const data::Dataset& train, const TrainConfig& cfg,
                    std::size_t max_steps) {
    return run_epochs(train, cfg, max_steps,
                      [&](const Tensor& x, const std::vector<std::size_t>&, const channel::Snr& snr,
                          Rng& rng) { return jscc_step(jscc, x, cfg.channel, snr, cfg.opt, rng); });
}

std::string_view system_name(System s) {
    switch (s) {
        case System::gocom: return "gocom";
        case System::jscc_task: return "jscc";
        case System::upper: return "upper";
    }
    return "unknown";
}

std::vector<MetricsRow> evaluate_sweep(System system, SystemModels m, const data::Dataset& test,
                                       const SweepConfig& cfg, const RowContext& ctx) {
    if (!m.task) throw std::invalid_argument("evaluate_sweep: task model required");
    if (system == System::gocom && (!m.goe || !m.demapper)) {
        throw std::invalid_argument("evaluate_sweep: gocom needs encoder and demapper");
    }
    if (system == System::jscc_task && !m.jscc) throw std::invalid_argument("evaluate_sweep: jscc model required");
    if (cfg.repeats == 0 || cfg.grid.empty()) throw std::invalid_argument("evaluate_sweep: empty grid or repeats");

    std::vector<std::size_t> all(test.size());
    std::iota(all.begin(), all.end(), std::size_t{0});

    // The channel-free accuracy is the same at every grid point.
    const double upper = system == System::upper ? task_accuracy(*m.task, test) : 0.0;

    std::vector<MetricsRow> rows;
    for (std::size_t gi = 0; gi < cfg.grid.size(); ++gi) {
        const channel::Snr snr = cfg.grid[gi];
        std::vector<double> accs, psnrs;
        for (std::size_t r = 0; r < cfg.repeats; ++r) {
            if (system == System::upper) {
                accs.push_back(upper);
                continue;
            }
            Rng rng(derive_seed(cfg.seed, gi + 1, r + 1));
            std::size_t hits = 0;
            double sq_err = 0.0;
            for (std::size_t b = 0; b < test.size(); b += cfg.eval_batch) {
                std::span<const std::size_t> idx(all.data() + b, std::min(cfg.eval_batch, test.size() - b));
                const Tensor xb = test.gather(idx);
                const auto labels = test.gather_labels(idx);
                Tape tape;
                Var x = tape.constant(xb);
                Tensor logits;
                if (system == System::gocom) {
                    auto c = models::compose(tape, *m.goe, cfg.channel, snr, *m.demapper, *m.task, x, rng, false);
                    logits = c.y_hat.value();
                } else {
                    Var z = m.jscc->encoder.encode(tape, x, snr, false);
                    Var x_hat = m.jscc->decoder.demap(tape, channel::transmit(z, cfg.channel, snr, rng), snr, false);
                    sq_err += objective::comm_loss(xb, x_hat.value()) * static_cast<double>(xb.size());
                    logits = m.task->forward(tape, x_hat, false).value();
                }
                hits += static_cast<std::size_t>(
                    std::llround(objective::accuracy(logits, labels) * static_cast<double>(idx.size())));
            }
            accs.push_back(static_cast<double>(hits) / static_cast<double>(test.size()));
            if (system == System::jscc_task) {
                psnrs.push_back(objective::psnr_from_mse(sq_err / static_cast<double>(test.inputs.size()), 1.0));
            }
        }
        auto row = [&](std::string metric, const std::vector<double>& xs) {
            const auto ms = mean_std(xs);
            MetricsRow out;
            out.run_id = ctx.run_id;
            out.task = "classify";
            out.system = std::string(system_name(system));
            out.channel = system == System::upper ? "none" : std::string(channel::kind_name(cfg.channel));
            out.alpha = ctx.alpha;
            out.train_snr = ctx.train_snr;
            out.test_snr_db = snr.str();
            out.metric = std::move(metric);
            out.value = ms.mean;
            out.std = ms.std;
            out.repeats = xs.size();
            return out;
        };
        rows.push_back(row("accuracy", accs));
        if (system == System::jscc_task) rows.push_back(row("psnr_db", psnrs));
    }
    return rows;
}

}  // namespace gocom::train
