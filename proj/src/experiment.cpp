#include "gocom/experiment.hpp"

#include <chrono>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "gocom/catch_env.hpp"
#include "gocom/checkpoint.hpp"
#include "gocom/data.hpp"
#include "gocom/rl.hpp"
#include "gocom/supervised.hpp"

namespace gocom {

namespace fs = std::filesystem;

RunLog::RunLog(const fs::path& path, bool echo) : echo_(echo) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    out_.open(path, std::ios::app);
    if (!out_) throw std::runtime_error("cannot open log " + path.string());
}

void RunLog::line(const std::string& msg) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << ' ' << msg;
    out_ << s.str() << '\n';
    out_.flush();
    if (echo_) std::cerr << s.str() << '\n';
}

void write_metrics_file(const fs::path& path, std::vector<MetricsRow> rows) {
    sort_rows(rows);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    write_metrics_csv(f, rows);
}

namespace {

// Salts keep every random stream of a run independent and seed-derived.
enum Salt : std::uint64_t {
    kInitTask = 0x11,
    kInitGoe = 0x12,
    kInitDemapper = 0x13,
    kInitJscc = 0x14,
    kData = 0x21,
    kPretrain = 0x31,
    kTrain = 0x32,
    kJsccTrain = 0x33,
    kEval = 0x41,
    kWarmStart = 0x51,
};

// ---- classify ----

struct Datasets {
    data::Dataset train;
    data::Dataset test;
};

data::Dataset truncate(data::Dataset d, std::size_t n) {
    if (n == 0 || n >= d.size()) return d;
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    data::Dataset out;
    out.inputs = d.gather(idx);
    out.labels = d.gather_labels(idx);
    out.classes = d.classes;
    out.split = d.split;
    return out;
}

Datasets load_data(const ExperimentConfig& cfg) {
    const auto& dc = cfg.data;
    Datasets ds;
    if (dc.source == "idx") {
        ds.train = data::load_idx(dc.train_images, dc.train_labels, data::Split::train);
        ds.test = data::load_idx(dc.test_images, dc.test_labels, data::Split::test);
    } else {
        data::SynthConfig sc;
        sc.classes = dc.synth_classes;
        sc.noise = dc.synth_noise;
        sc.side = dc.synth_side;
        sc.blobs = dc.synth_blobs;
        sc.seed = derive_seed(cfg.seed, kData);
        sc.n = dc.synth_train;
        ds.train = data::gen_synth(sc, data::Split::train);
        sc.n = dc.synth_test;
        ds.test = data::gen_synth(sc, data::Split::test);
    }
    ds.train = truncate(std::move(ds.train), dc.max_train);
    ds.test = truncate(std::move(ds.test), dc.max_test);
    const std::size_t classes = std::max(ds.train.classes, ds.test.classes);
    ds.train.classes = ds.test.classes = classes;
    return ds;
}

struct ClassifyModels {
    models::GoeModel goe;
    models::DemapperModel demapper;
    models::TaskModel task;
    models::JsccModel jscc;
};

ClassifyModels build_classify(const ExperimentConfig& cfg, const Shape& input, std::size_t classes) {
    const std::size_t s = models::symbols_for_rate(numel(input), cfg.rate);
    Rng task_rng(derive_seed(cfg.seed, kInitTask));
    Rng goe_rng(derive_seed(cfg.seed, kInitGoe));
    Rng dem_rng(derive_seed(cfg.seed, kInitDemapper));
    Rng jscc_rng(derive_seed(cfg.seed, kInitJscc));
    ClassifyModels m;
    if (cfg.arch == "conv") {
        m.task = models::make_conv_classifier(input, classes, task_rng);
        m.goe = models::make_conv_goe(input, s, cfg.effective_snr_conditioning(), goe_rng);
        m.demapper = models::make_conv_demapper(input, s, cfg.effective_snr_conditioning(), dem_rng);
    } else {
        m.task = models::make_dense_qnet(input, cfg.hidden, classes, task_rng);
        m.task.kind = models::HeadKind::classifier;
        m.goe = models::make_dense_goe(input, cfg.hidden, s, cfg.effective_snr_conditioning(), goe_rng);
        m.demapper = models::make_dense_demapper(input, cfg.hidden, s, cfg.effective_snr_conditioning(), dem_rng);
    }
    m.jscc = models::make_jscc_like(m.goe, m.demapper, jscc_rng);
    return m;
}

train::TrainConfig train_config(const ExperimentConfig& cfg, std::size_t epochs, Salt salt) {
    train::TrainConfig tc;
    tc.alpha = cfg.alpha;
    tc.opt = cfg.opt;
    tc.batch = cfg.batch;
    tc.epochs = epochs;
    tc.train_snr = cfg.effective_train_snr();
    tc.channel = cfg.channel;
    tc.freeze_task = cfg.freeze_task;
    tc.seed = derive_seed(cfg.seed, salt);
    return tc;
}

std::string percent(double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * v << "%";
    return s.str();
}

// Loads ξ_pre when configured, otherwise pretrains and saves it.
void obtain_pretrained_classifier(const ExperimentConfig& cfg, models::TaskModel& task,
                                  const Datasets& ds, RunLog& log) {
    if (cfg.task_checkpoint) {
        restore_values(task.net.params(), load_checkpoint(*cfg.task_checkpoint), "task checkpoint");
        log.line("loaded pretrained task head from " + cfg.task_checkpoint->string());
    } else {
        log.line("pretraining task head for " + std::to_string(cfg.pretrain_epochs) + " epochs");
        train::pretrain_task(task, ds.train, train_config(cfg, cfg.pretrain_epochs, kPretrain));
        save_checkpoint(task.net.params(), cfg.out / kTaskPreCkpt);
    }
    log.line("pretrained task accuracy (no channel): " + percent(train::task_accuracy(task, ds.test)));
}

train::SweepConfig sweep_config(const ExperimentConfig& cfg) {
    train::SweepConfig sc;
    sc.grid = cfg.effective_grid();
    sc.repeats = cfg.repeats;
    sc.channel = cfg.channel;
    sc.seed = derive_seed(cfg.seed, kEval);
    return sc;
}

train::RowContext row_context(const ExperimentConfig& cfg) {
    train::RowContext ctx;
    ctx.run_id = cfg.run_id;
    switch (cfg.system) {
        case SystemKind::gocom:
            ctx.alpha = cfg.alpha;
            ctx.train_snr = cfg.effective_train_snr().str();
            break;
        case SystemKind::jscc:
            ctx.train_snr = cfg.effective_train_snr().str();
            break;
        default:
            ctx.train_snr = "none";
    }
    return ctx;
}

std::vector<MetricsRow> evaluate_classify(const ExperimentConfig& cfg, ClassifyModels& m,
                                          const data::Dataset& test) {
    train::SystemModels sm;
    sm.task = &m.task;
    train::System sys = train::System::upper;
    if (cfg.system == SystemKind::gocom) {
        sys = train::System::gocom;
        sm.goe = &m.goe;
        sm.demapper = &m.demapper;
    } else if (cfg.system == SystemKind::jscc) {
        sys = train::System::jscc_task;
        sm.jscc = &m.jscc;
    }
    return train::evaluate_sweep(sys, sm, test, sweep_config(cfg), row_context(cfg));
}

std::vector<MetricsRow> classify_pipeline(const ExperimentConfig& cfg, RunLog& log) {
    const auto ds = load_data(cfg);
    log.line("data: " + std::to_string(ds.train.size()) + " train / " + std::to_string(ds.test.size()) +
             " test samples, " + std::to_string(ds.train.classes) + " classes, shape " +
             shape_str(ds.train.sample_shape()));
    auto m = build_classify(cfg, ds.train.sample_shape(), ds.train.classes);
    obtain_pretrained_classifier(cfg, m.task, ds, log);

    if (cfg.system == SystemKind::gocom) {
        log.line("training gocom: alpha=" + format_double(cfg.alpha) + " epochs=" + std::to_string(cfg.epochs) +
                 " symbols=" + std::to_string(m.goe.symbols));
        const auto tl = train::train_gocom(m.goe, m.demapper, m.task, ds.train,
                                           train_config(cfg, cfg.epochs, kTrain));
        for (std::size_t e = 0; e < tl.epoch_loss.size(); ++e) {
            log.line("epoch " + std::to_string(e + 1) + " loss " + format_double(tl.epoch_loss[e]));
        }
        save_checkpoint(m.goe.net.params(), cfg.out / kGoeCkpt);
        save_checkpoint(m.demapper.net.params(), cfg.out / kDemapperCkpt);
        save_checkpoint(m.task.net.params(), cfg.out / kTaskCkpt);
    } else if (cfg.system == SystemKind::jscc) {
        const std::size_t epochs = cfg.jscc_epochs ? cfg.jscc_epochs : cfg.epochs;
        log.line("training jscc: epochs=" + std::to_string(epochs));
        const auto tl = train::train_jscc(m.jscc, ds.train, train_config(cfg, epochs, kJsccTrain));
        for (std::size_t e = 0; e < tl.epoch_loss.size(); ++e) {
            log.line("epoch " + std::to_string(e + 1) + " mse " + format_double(tl.epoch_loss[e]));
        }
        save_checkpoint(m.jscc.encoder.net.params(), cfg.out / kJsccEncoderCkpt);
        save_checkpoint(m.jscc.decoder.net.params(), cfg.out / kJsccDecoderCkpt);
    }
    log.line("evaluating over " + std::to_string(cfg.effective_grid().size()) + " SNR points");
    return evaluate_classify(cfg, m, ds.test);
}

// ---- rl ----

rl::Agent build_agent(const ExperimentConfig& cfg, bool with_channel) {
    const Shape obs{env::CatchEnv::kFrames, env::CatchEnv::kHeight, env::CatchEnv::kWidth};
    const std::size_t s = models::symbols_for_rate(numel(obs), cfg.rate);
    Rng task_rng(derive_seed(cfg.seed, kInitTask));
    rl::Agent a{std::nullopt, std::nullopt, models::make_dense_qnet(obs, cfg.qnet_hidden, env::CatchEnv::kActions, task_rng)};
    if (with_channel) {
        Rng goe_rng(derive_seed(cfg.seed, kInitGoe));
        Rng dem_rng(derive_seed(cfg.seed, kInitDemapper));
        a.goe = models::make_dense_goe(obs, cfg.hidden, s, cfg.effective_snr_conditioning(), goe_rng);
        a.demapper = models::make_dense_demapper(obs, cfg.hidden, s, cfg.effective_snr_conditioning(), dem_rng);
    }
    return a;
}

rl::DqnConfig dqn_config(const ExperimentConfig& cfg, bool pretrain) {
    rl::DqnConfig d = cfg.dqn;
    d.channel = cfg.channel;
    d.train_snr = cfg.effective_train_snr().fixed;
    d.seed = derive_seed(cfg.seed, pretrain ? kPretrain : kTrain);
    if (pretrain) {
        d.alpha = 0.0;
        d.total_steps = cfg.pretrain_steps;
        d.freeze_task = false;
    } else {
        d.alpha = cfg.alpha;
        d.freeze_task = cfg.freeze_task;
    }
    return d;
}

void log_rl(const rl::RlLog& rlog, RunLog& log) {
    const std::size_t n = rlog.episode_raw_reward.size();
    const std::size_t chunk = std::max<std::size_t>(1, n / 10);
    for (std::size_t b = 0; b < n; b += chunk) {
        const std::size_t e = std::min(n, b + chunk);
        std::vector<double> part(rlog.episode_raw_reward.begin() + b, rlog.episode_raw_reward.begin() + e);
        std::vector<double> mod(rlog.episode_modified_reward.begin() + b, rlog.episode_modified_reward.begin() + e);
        log.line("episodes " + std::to_string(b + 1) + "-" + std::to_string(e) + ": raw reward " +
                 format_double(mean_std(part).mean) + ", modified " + format_double(mean_std(mod).mean));
    }
    log.line("updates " + std::to_string(rlog.updates) + ", target syncs " + std::to_string(rlog.syncs));
}

// Running average of the raw episode reward every 25 episodes.
rl::RlHooks progress_hooks(RunLog& log) {
    rl::RlHooks h;
    h.on_episode = [&log, acc = 0.0](std::size_t episode, double raw, double) mutable {
        acc += raw;
        if ((episode + 1) % 25 == 0) {
            log.line("episode " + std::to_string(episode + 1) + ": mean raw reward " + format_double(acc / 25.0));
            acc = 0.0;
        }
    };
    return h;
}

void obtain_pretrained_qnet(const ExperimentConfig& cfg, models::TaskModel& qnet, RunLog& log) {
    if (cfg.task_checkpoint) {
        restore_values(qnet.net.params(), load_checkpoint(*cfg.task_checkpoint), "task checkpoint");
        log.line("loaded pretrained q-network from " + cfg.task_checkpoint->string());
        return;
    }
    rl::Agent pre = build_agent(cfg, false);
    log.line("pretraining channel-free DQN for " + std::to_string(cfg.pretrain_steps) + " steps");
    env::CatchEnv env;
    log_rl(rl::train_rl(pre, env, dqn_config(cfg, true), progress_hooks(log)), log);
    save_checkpoint(pre.qnet.net.params(), cfg.out / kTaskPreCkpt);
    qnet.net.params().assign_values(pre.qnet.net.params());
}

MetricsRow rl_row(const ExperimentConfig& cfg, const std::string& channel, const std::string& train_snr,
                  const std::string& test_snr, const std::string& metric, double value, double std,
                  std::size_t repeats) {
    MetricsRow r;
    r.run_id = cfg.run_id;
    r.task = "rl";
    r.system = std::string(system_kind_name(cfg.system));
    r.channel = channel;
    if (cfg.system == SystemKind::gocom) r.alpha = cfg.alpha;
    r.train_snr = train_snr;
    r.test_snr_db = test_snr;
    r.metric = metric;
    r.value = value;
    r.std = std;
    r.repeats = repeats;
    return r;
}

void push_reward_rows(std::vector<MetricsRow>& rows, const ExperimentConfig& cfg, const std::string& channel,
                      const std::string& train_snr, const std::string& test_snr, const rl::EvalResult& ev) {
    rows.push_back(rl_row(cfg, channel, train_snr, test_snr, "reward_mean", ev.mean, ev.std, ev.rewards.size()));
    rows.push_back(rl_row(cfg, channel, train_snr, test_snr, "reward_std", ev.std, 0.0, ev.rewards.size()));
}

std::vector<MetricsRow> evaluate_rl(const ExperimentConfig& cfg, rl::Agent* agent, RunLog& log) {
    const auto grid = cfg.effective_grid();
    const std::uint64_t seed = derive_seed(cfg.seed, kEval);
    env::CatchEnv env;
    std::vector<MetricsRow> rows;
    if (cfg.system == SystemKind::gocom) {
        const std::string tsnr = cfg.effective_train_snr().str();
        for (std::size_t gi = 0; gi < grid.size(); ++gi) {
            const auto ev = rl::eval_policy(*agent, env, cfg.channel, grid[gi], cfg.eval_episodes, derive_seed(seed, gi + 1));
            log.line("test snr " + grid[gi].str() + ": reward " + format_double(ev.mean) + " +- " + format_double(ev.std));
            push_reward_rows(rows, cfg, std::string(channel::kind_name(cfg.channel)), tsnr, grid[gi].str(), ev);
        }
        return rows;
    }
    // Channel-free systems: one evaluation, repeated at every grid point.
    const auto ev = cfg.system == SystemKind::random
                        ? rl::eval_random(env, cfg.eval_episodes, seed)
                        : rl::eval_policy(*agent, env, cfg.channel, channel::Snr::noiseless(), cfg.eval_episodes, seed);
    log.line(std::string(system_kind_name(cfg.system)) + " reward " + format_double(ev.mean) + " +- " + format_double(ev.std));
    for (const auto& snr : grid) push_reward_rows(rows, cfg, "none", "none", snr.str(), ev);
    return rows;
}

std::vector<MetricsRow> rl_pipeline(const ExperimentConfig& cfg, RunLog& log) {
    if (cfg.system == SystemKind::random) return evaluate_rl(cfg, nullptr, log);
    rl::Agent agent = build_agent(cfg, cfg.system == SystemKind::gocom);
    obtain_pretrained_qnet(cfg, agent.qnet, log);
    if (cfg.system == SystemKind::gocom) {
        env::CatchEnv env;
        const auto snr = cfg.effective_train_snr().fixed;
        if (cfg.warm_start.steps > 0) {
            rl::WarmStartConfig ws = cfg.warm_start;
            ws.seed = derive_seed(cfg.seed, kWarmStart);
            log.line("warm-starting encoder/demapper for reconstruction: " + std::to_string(ws.steps) + " steps");
            const auto losses = rl::warm_start_codec(agent, env, ws, cfg.channel, snr);
            log.line("warm-start mse: first " + format_double(losses.front()) + ", last " + format_double(losses.back()));
        }
        log.line("training gocom DQN: alpha=" + format_double(cfg.alpha) + " steps=" +
                 std::to_string(cfg.dqn.total_steps) + " train snr=" + snr.str());
        log_rl(rl::train_rl(agent, env, dqn_config(cfg, false), progress_hooks(log)), log);
        save_checkpoint(agent.goe->net.params(), cfg.out / kGoeCkpt);
        save_checkpoint(agent.demapper->net.params(), cfg.out / kDemapperCkpt);
        save_checkpoint(agent.qnet.net.params(), cfg.out / kTaskCkpt);
    }
    return evaluate_rl(cfg, &agent, log);
}

void prepare_out(const ExperimentConfig& cfg) {
    validate(cfg);
    fs::create_directories(cfg.out);
}

}  // namespace

fs::path run_pretrain(const ExperimentConfig& cfg, RunLog& log) {
    prepare_out(cfg);
    ExperimentConfig c = cfg;
    c.task_checkpoint.reset();
    if (c.task == TaskKind::classify) {
        const auto ds = load_data(c);
        auto m = build_classify(c, ds.train.sample_shape(), ds.train.classes);
        obtain_pretrained_classifier(c, m.task, ds, log);
    } else {
        rl::Agent a = build_agent(c, false);
        obtain_pretrained_qnet(c, a.qnet, log);
    }
    return c.out / kTaskPreCkpt;
}

std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg, RunLog& log) {
    prepare_out(cfg);
    log.line("run " + cfg.run_id + ": task=" + std::string(task_name(cfg.task)) + " system=" +
             std::string(system_kind_name(cfg.system)) + " seed=" + std::to_string(cfg.seed));
    auto rows = cfg.task == TaskKind::classify ? classify_pipeline(cfg, log) : rl_pipeline(cfg, log);
    write_metrics_file(cfg.out / kMetricsFile, rows);
    log.line("wrote " + std::to_string(rows.size()) + " rows to " + (cfg.out / kMetricsFile).string());
    return rows;
}

std::vector<MetricsRow> run_eval(const ExperimentConfig& cfg, RunLog& log) {
    prepare_out(cfg);
    auto ckpt = [&](const char* name) { return load_checkpoint(cfg.out / name); };
    std::vector<MetricsRow> rows;
    if (cfg.task == TaskKind::classify) {
        const auto ds = load_data(cfg);
        auto m = build_classify(cfg, ds.train.sample_shape(), ds.train.classes);
        if (cfg.system == SystemKind::gocom) {
            restore_values(m.goe.net.params(), ckpt(kGoeCkpt), kGoeCkpt);
            restore_values(m.demapper.net.params(), ckpt(kDemapperCkpt), kDemapperCkpt);
            restore_values(m.task.net.params(), ckpt(kTaskCkpt), kTaskCkpt);
        } else {
            restore_values(m.task.net.params(), ckpt(kTaskPreCkpt), kTaskPreCkpt);
            if (cfg.system == SystemKind::jscc) {
                restore_values(m.jscc.encoder.net.params(), ckpt(kJsccEncoderCkpt), kJsccEncoderCkpt);
                restore_values(m.jscc.decoder.net.params(), ckpt(kJsccDecoderCkpt), kJsccDecoderCkpt);
            }
        }
        rows = evaluate_classify(cfg, m, ds.test);
    } else if (cfg.system == SystemKind::random) {
        rows = evaluate_rl(cfg, nullptr, log);
    } else {
        rl::Agent a = build_agent(cfg, cfg.system == SystemKind::gocom);
        if (cfg.system == SystemKind::gocom) {
            restore_values(a.goe->net.params(), ckpt(kGoeCkpt), kGoeCkpt);
            restore_values(a.demapper->net.params(), ckpt(kDemapperCkpt), kDemapperCkpt);
            restore_values(a.qnet.net.params(), ckpt(kTaskCkpt), kTaskCkpt);
        } else {
            restore_values(a.qnet.net.params(), ckpt(kTaskPreCkpt), kTaskPreCkpt);
        }
        rows = evaluate_rl(cfg, &a, log);
    }
    write_metrics_file(cfg.out / kMetricsFile, rows);
    log.line("eval wrote " + std::to_string(rows.size()) + " rows");
    return rows;
}

std::vector<MetricsRow> run_baselines(const ExperimentConfig& cfg, RunLog& log) {
    prepare_out(cfg);
    const std::vector<SystemKind> systems = cfg.task == TaskKind::classify
                                                ? std::vector{SystemKind::jscc, SystemKind::upper}
                                                : std::vector{SystemKind::random, SystemKind::upper};
    std::vector<MetricsRow> all;
    for (SystemKind s : systems) {
        ExperimentConfig c = cfg;
        c.system = s;
        c.run_id = cfg.run_id + "_" + std::string(system_kind_name(s));
        c.out = cfg.out / std::string(system_kind_name(s));
        // The baselines share one pretrained head.
        if (!c.task_checkpoint && fs::exists(cfg.out / kTaskPreCkpt)) c.task_checkpoint = cfg.out / kTaskPreCkpt;
        auto rows = run_experiment(c, log);
        if (!cfg.task_checkpoint && fs::exists(c.out / kTaskPreCkpt) && !fs::exists(cfg.out / kTaskPreCkpt)) {
            fs::copy_file(c.out / kTaskPreCkpt, cfg.out / kTaskPreCkpt);
        }
        all.insert(all.end(), rows.begin(), rows.end());
    }
    write_metrics_file(cfg.out / kMetricsFile, all);
    return all;
}

SweepAxis parse_axis(std::string_view s) {
    if (s == "alpha") return SweepAxis::alpha;
    if (s == "snr") return SweepAxis::snr;
    throw std::invalid_argument("unknown sweep axis '" + std::string(s) + "' (alpha|snr)");
}

std::vector<MetricsRow> run_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<std::string>& values,
                                  RunLog& log) {
    if (values.empty()) throw std::invalid_argument("sweep needs at least one value");
    prepare_out(base);
    // Validate every point before any compute.
    std::vector<ExperimentConfig> runs;
    for (const auto& v : values) {
        ExperimentConfig c = base;
        if (axis == SweepAxis::alpha) {
            c.alpha = std::stod(v);
            c.run_id = base.run_id + "_alpha" + v;
        } else {
            c.train_snr = train::SnrPolicy::at(channel::Snr::parse(v));
            c.run_id = base.run_id + "_snr" + v;
        }
        c.out = base.out / c.run_id;
        validate(c);
        runs.push_back(std::move(c));
    }
    std::vector<MetricsRow> merged;
    for (const auto& c : runs) {
        try {
            auto rows = run_experiment(c, log);
            merged.insert(merged.end(), rows.begin(), rows.end());
        } catch (const std::exception& e) {
            log.line("run " + c.run_id + " failed: " + e.what() + "; keeping " + std::to_string(merged.size()) + " rows");
            write_metrics_file(base.out / kMetricsFile, merged);
            throw;
        }
    }
    write_metrics_file(base.out / kMetricsFile, merged);
    log.line("sweep merged " + std::to_string(merged.size()) + " rows");
    return merged;
}

}  // namespace gocom
