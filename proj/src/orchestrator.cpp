#include "nca/orchestrator.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nca/checkpoint.hpp"
#include "nca/collage.hpp"
#include "nca/envs/addition.hpp"
#include "nca/png.hpp"

namespace nca {

namespace {

DncConfig dnc_config_from(const RunConfig& cfg) {
  DncConfig d;
  d.memory_locations = cfg.memory_locations;
  d.word_width = cfg.word_width;
  d.read_heads = cfg.read_heads;
  d.controller_units = cfg.controller_units;
  return d;
}

CaeConfig cae_config_from(const RunConfig& cfg) {
  CaeConfig c;
  c.latent_dims = cfg.latent_dims;
  return c;
}

std::string rng_to_string(Rng& rng) {
  std::ostringstream os;
  os << rng.engine();
  return os.str();
}

void rng_from_string(Rng& rng, const std::string& s) {
  std::istringstream is(s);
  is >> rng.engine();
}

}  // namespace

Orchestrator::Orchestrator(RunConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {
  cfg_.validate();
  env_ = make_env(cfg_.env, 1);
  Rng init_rng = rng_.fork(0x6d6f64656cull);
  model_ = WorldModel<Real>(cae_config_from(cfg_), dnc_config_from(cfg_), env_->num_actions(),
                            init_rng);
  model_opt_ = Adam<Real>(model_.parameters(), {(Real)cfg_.model_lr});
  const int obs_dims = cfg_.latent_dims + 2 * cfg_.controller_units;
  agent_ = AgentNet<Real>(obs_dims, env_->num_actions(), cfg_.agent_hidden, init_rng);
  agent_opt_ = Adam<Real>(agent_.parameters(), {(Real)cfg_.ppo.lr});
}

Eigen::ArrayXf Orchestrator::live_obs(const Tensor<Real>& z, const DncState<Real>& state) const {
  Eigen::ArrayXf obs(z.size() + state.h.size() + state.c.size());
  obs << z.value(), state.h.value(), state.c.value();
  return obs;
}

// One live episode. The model runs alongside the environment, fed with the
// encoded live frames, so the agent sees the same [z, h, c] it is trained on.
Rollout Orchestrator::collect_rollout(ActMode mode) {
  Rollout ro;
  ro.frames.push_back(env_->reset());
  auto state = model_.initial_state();
  auto z = model_.cae.encode(frame_to_tensor<Real>(ro.frames.back()));
  while (!env_->done()) {
    const auto a = act(agent_, live_obs(z, state), mode, rng_);
    auto res = env_->step(a.action);
    state = model_.step(state, z, a.action).second;
    z = model_.cae.encode(frame_to_tensor<Real>(res.frame));
    ro.frames.push_back(std::move(res.frame));
    ro.actions.push_back(a.action);
    ro.rewards.push_back(res.reward);
    ro.dones.push_back(res.done);
  }
  ro.validate();
  return ro;
}

std::vector<Rollout> Orchestrator::collect_live(int n) {
  std::vector<Rollout> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(collect_rollout(ActMode::Sample));
  return out;
}

EvalResult Orchestrator::live_eval(int n, ActMode mode) {
  std::vector<double> totals(n, 0.0);
  for (int i = 0; i < n; ++i) {
    auto ro = collect_rollout(mode);
    for (float r : ro.rewards) totals[i] += r;
  }
  EvalResult e;
  for (double t : totals) e.mean += t;
  e.mean /= n;
  for (double t : totals) e.stddev += (t - e.mean) * (t - e.mean);
  e.stddev = std::sqrt(e.stddev / n);
  return e;
}

EvalResult Orchestrator::live_eval_scripted(int n, const std::vector<int>& actions) {
  std::vector<double> totals(n, 0.0);
  for (int i = 0; i < n; ++i) {
    env_->reset();
    size_t at = 0;
    while (!env_->done()) {
      const int a = at < actions.size() ? actions[at++] : 0;
      totals[i] += env_->step(a).reward;
    }
  }
  EvalResult e;
  for (double t : totals) e.mean += t;
  e.mean /= n;
  for (double t : totals) e.stddev += (t - e.mean) * (t - e.mean);
  e.stddev = std::sqrt(e.stddev / n);
  return e;
}

PpoBatch Orchestrator::build_sim_batch(int n_rollouts, double* mean_return) {
  PpoBatch batch;
  double total_return = 0;
  for (int i = 0; i < n_rollouts; ++i) {
    require(!buffer_.empty(), "simulate: experience buffer is empty");
    const Frame& seed = buffer_[rng_.randint((int)buffer_.size())].frames.front();
    std::vector<float> log_probs, values;
    auto policy = [this, &log_probs, &values](const Eigen::ArrayXf& obs) {
      const auto a = act(agent_, obs, ActMode::Sample, rng_);
      log_probs.push_back(a.log_prob);
      values.push_back(a.value);
      return a.action;
    };
    auto sim = simulate(model_, policy, seed, cfg_.done_threshold, cfg_.sim_max_steps);
    std::vector<uint8_t> dones(sim.steps(), 0);
    dones.back() = 1;  // simulation ends terminal, by threshold or cap
    auto g = gae(sim.rewards, values, dones, cfg_.ppo.gamma, cfg_.ppo.lambda);
    for (int t = 0; t < sim.steps(); ++t) {
      batch.obs.push_back(sim.obs[t]);
      batch.actions.push_back(sim.actions[t]);
      batch.old_log_probs.push_back(log_probs[t]);
      batch.advantages.push_back(g.advantages[t]);
      batch.returns.push_back(g.returns[t]);
      total_return += sim.rewards[t];
    }
  }
  if (mean_return) *mean_return = total_return / n_rollouts;
  return batch;
}

SimRollout Orchestrator::simulate_greedy(int max_steps) {
  require(!buffer_.empty() || !retained_.empty(), "simulate: no live experience to seed from");
  const auto& src = buffer_.empty() ? retained_ : buffer_;
  const Frame& seed = src[rng_.randint((int)src.size())].frames.front();
  auto policy = [this](const Eigen::ArrayXf& obs) {
    return act(agent_, obs, ActMode::Greedy, rng_).action;
  };
  return simulate(model_, policy, seed, cfg_.done_threshold, max_steps);
}

IterationReport Orchestrator::run_iteration() {
  IterationReport report;
  report.iteration = iteration_;
  report.lock_level = lock_;
  env_->set_lock_level(lock_);

  // collect fresh rollouts on top of the retained share
  const int fresh = iteration_ == 1 ? cfg_.live_rollouts
                                    : cfg_.live_rollouts - (int)retained_.size();
  buffer_ = retained_;
  auto fresh_rollouts = collect_live(fresh);
  buffer_.insert(buffer_.end(), std::make_move_iterator(fresh_rollouts.begin()),
                 std::make_move_iterator(fresh_rollouts.end()));
  report.buffer_fresh = fresh;
  report.buffer_retained = (int)retained_.size();

  ModelTrainConfig<Real> mt;
  mt.epochs = cfg_.model_epochs;
  mt.tbptt_len = cfg_.tbptt_len;
  mt.grad_clip = (Real)cfg_.grad_clip;
  mt.weights = {(Real)cfg_.w_recon, (Real)cfg_.w_done, (Real)cfg_.w_reward, (Real)cfg_.w_latent};
  report.model_epochs = train_model(model_, model_opt_, buffer_, mt, rng_);

  const double threshold = env_->solve_threshold(lock_);
  for (int cycle = 1; cycle <= cfg_.rl_cycles; ++cycle) {
    CycleLog log;
    log.cycle = cycle;
    auto batch = build_sim_batch(cfg_.sim_rollouts, &log.sim_return);
    ppo_update(agent_, agent_opt_, std::move(batch), cfg_.ppo, rng_);
    auto greedy = live_eval(cfg_.test_rollouts, ActMode::Greedy);
    auto sampled = live_eval(cfg_.test_rollouts, ActMode::Sample);
    log.live_greedy_mean = greedy.mean;
    log.live_greedy_std = greedy.stddev;
    log.live_sampled_mean = sampled.mean;
    log.live_sampled_std = sampled.stddev;
    log.solved = greedy.mean >= threshold - 1e-9;
    report.cycles.push_back(log);
    if (log.solved) {
      report.solved = true;
      break;
    }
  }

  // keep 1% of N_m into the next iteration, sampled without replacement
  const int keep = (int)std::ceil(cfg_.retain_fraction * cfg_.live_rollouts);
  retained_.clear();
  std::vector<int> idx(buffer_.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < keep && !idx.empty(); ++i) {
    const int j = rng_.randint((int)idx.size());
    retained_.push_back(buffer_[idx[j]]);
    idx.erase(idx.begin() + j);
  }
  buffer_.clear();

  if (report.solved && lock_ < env_->num_levels()) ++lock_;
  ++iteration_;
  return report;
}

std::vector<IterationReport> Orchestrator::run() {
  namespace fs = std::filesystem;
  fs::create_directories(cfg_.run_dir);
  cfg_.save(cfg_.run_dir + "/config.json");
  std::vector<IterationReport> reports;
  while (iteration_ <= cfg_.iterations) {
    const int it = iteration_;
    auto report = run_iteration();
    reports.push_back(report);
    write_model_csv(cfg_.run_dir + "/iter" + std::to_string(it) + "_model.csv",
                    report.model_epochs);
    write_cycles_csv(cfg_.run_dir + "/iter" + std::to_string(it) + "_cycles.csv",
                     report.cycles);
    save_checkpoint(cfg_.run_dir + "/checkpoint_iter" + std::to_string(it) + ".bin");
    save_checkpoint(cfg_.run_dir + "/checkpoint_latest.bin");

    // live-vs-simulated collage for this iteration
    auto live = collect_rollout(ActMode::Greedy);
    auto sim = replay_actions(model_, live.frames.front(), live.actions);
    CollageRow live_row, sim_row;
    for (int t = 0; t < live.steps(); ++t) {
      live_row.frames.push_back(live.frames[t + 1]);
      live_row.captions.push_back(format_caption(live.rewards[t], live.dones[t] ? 1.0f : 0.0f));
      sim_row.frames.push_back(
          tensor_to_frame(model_.cae.decode(Tensor<Real>::from_array(
              {cfg_.latent_dims}, ArrayX<Real>(sim.latents[t + 1])))));
      sim_row.captions.push_back(format_caption(sim.rewards[t], sim.done_probs[t]));
    }
    write_png_gray(cfg_.run_dir + "/iter" + std::to_string(it) + "_collage.png",
                   compose_collage({live_row, sim_row}));
  }
  return reports;
}

void Orchestrator::save_checkpoint(const std::string& path) const {
  BlobWriter w;
  w.add_bytes("config", cfg_.to_json());
  w.add_int("iteration", iteration_);
  w.add_int("lock_level", lock_);
  save_params(w, "model", model_.parameters());
  save_params(w, "agent", agent_.parameters());
  auto save_adam = [&w](const std::string& prefix, const Adam<Real>& opt) {
    w.add_int(prefix + ".t", opt.step_count());
    for (size_t i = 0; i < opt.m().size(); ++i) {
      w.add_array(prefix + ".m" + std::to_string(i), opt.m()[i]);
      w.add_array(prefix + ".v" + std::to_string(i), opt.v()[i]);
    }
  };
  save_adam("model.adam", model_opt_);
  save_adam("agent.adam", agent_opt_);
  w.add_int("retained.count", (int64_t)retained_.size());
  for (size_t r = 0; r < retained_.size(); ++r) {
    const auto& ro = retained_[r];
    const std::string p = "retained." + std::to_string(r);
    ArrayX<Real> frames((long)ro.frames.size() * kFrameSize * kFrameSize);
    for (size_t i = 0; i < ro.frames.size(); ++i)
      for (long k = 0; k < kFrameSize * kFrameSize; ++k)
        frames[(long)i * kFrameSize * kFrameSize + k] = ro.frames[i].data()[k];
    w.add_array(p + ".frames", frames);
    ArrayX<Real> meta((long)ro.steps() * 3);
    for (int t = 0; t < ro.steps(); ++t) {
      meta[t * 3] = (Real)ro.actions[t];
      meta[t * 3 + 1] = ro.rewards[t];
      meta[t * 3 + 2] = (Real)ro.dones[t];
    }
    w.add_array(p + ".steps", meta);
  }
  Rng tmp = rng_;
  w.add_bytes("rng", rng_to_string(tmp));
  w.write(path);
}

void Orchestrator::load_checkpoint(const std::string& path) {
  BlobReader r(path);
  const RunConfig saved = RunConfig::from_json(r.bytes("config"));
  require(saved.env == cfg_.env && saved.memory_locations == cfg_.memory_locations &&
              saved.word_width == cfg_.word_width && saved.read_heads == cfg_.read_heads &&
              saved.controller_units == cfg_.controller_units &&
              saved.latent_dims == cfg_.latent_dims && saved.agent_hidden == cfg_.agent_hidden,
          "checkpoint: model geometry does not match the active config");
  iteration_ = (int)r.integer("iteration");
  lock_ = (int)r.integer("lock_level");
  load_params(r, "model", model_.parameters());
  load_params(r, "agent", agent_.parameters());
  auto load_adam = [&r](const std::string& prefix, Adam<Real>& opt) {
    opt.set_step_count(r.integer(prefix + ".t"));
    for (size_t i = 0; i < opt.m().size(); ++i) {
      opt.m()[i] = r.array(prefix + ".m" + std::to_string(i));
      opt.v()[i] = r.array(prefix + ".v" + std::to_string(i));
    }
  };
  load_adam("model.adam", model_opt_);
  load_adam("agent.adam", agent_opt_);
  retained_.clear();
  const int64_t count = r.integer("retained.count");
  for (int64_t i = 0; i < count; ++i) {
    const std::string p = "retained." + std::to_string(i);
    auto frames = r.array(p + ".frames");
    auto meta = r.array(p + ".steps");
    Rollout ro;
    const long n_frames = frames.size() / (kFrameSize * kFrameSize);
    for (long k = 0; k < n_frames; ++k) {
      Frame f(kFrameSize, kFrameSize);
      std::copy(frames.data() + k * kFrameSize * kFrameSize,
                frames.data() + (k + 1) * kFrameSize * kFrameSize, f.data());
      ro.frames.push_back(std::move(f));
    }
    for (long t = 0; t < meta.size() / 3; ++t) {
      ro.actions.push_back((int)meta[t * 3]);
      ro.rewards.push_back(meta[t * 3 + 1]);
      ro.dones.push_back(meta[t * 3 + 2] != 0);
    }
    retained_.push_back(std::move(ro));
  }
  rng_from_string(rng_, r.bytes("rng"));
  env_->set_lock_level(lock_);
}

// ---------------------------------------------------------------------------
// addition benchmark

namespace {

Tensor<Real> addition_input(const AdditionSample& s, int t) {
  ArrayX<Real> v(kAdditionInputDims);
  for (int i = 0; i < kAdditionInputDims; ++i) v[i] = s.inputs[t][i];
  return Tensor<Real>::from_array({kAdditionInputDims}, std::move(v));
}

// loss at the delimiter step only; earlier TBPTT windows just advance state
template <typename Model>
double addition_train_one(const Model& model, Adam<Real>& opt, const AdditionSample& s,
                          int tbptt, Real clip) {
  auto state = model.initial_state();
  const int T = (int)s.inputs.size();
  double loss_out = 0;
  for (auto [t0, t1] : tbptt_windows(T, tbptt)) {
    if (t1 < T) {
      for (int t = t0; t < t1; ++t) state = model(state, addition_input(s, t)).second;
      continue;  // no objective in this window; values carry, tapeless
    }
    Tape<Real> tape;
    Tensor<Real> y;
    for (int t = t0; t < t1; ++t) std::tie(y, state) = model(state, addition_input(s, t));
    auto loss = square(y - Tensor<Real>::scalar(s.target));
    tape.backward(loss);
    clip_global_norm(opt.params(), clip);
    opt.step();
    loss_out = (double)loss.item();
  }
  return loss_out;
}

template <typename Model>
float addition_predict(const Model& model, const AdditionSample& s) {
  auto state = model.initial_state();
  Tensor<Real> y;
  for (int t = 0; t < (int)s.inputs.size(); ++t) std::tie(y, state) = model(state, addition_input(s, t));
  return (float)y.item();
}

}  // namespace

AdditionBenchResult run_addition_benchmark(const RunConfig& cfg) {
  Rng root(cfg.seed);
  Rng init_rng = root.fork(0x696e6974ull);
  Rng stream_rng = root.fork(0x7374726dull);

  DncConfig dc = dnc_config_from(cfg);
  dc.input_size = kAdditionInputDims;
  dc.output_size = 1;
  DncCell<Real> dnc(dc, init_rng);
  LstmModel<Real> lstm(cfg.controller_units, kAdditionInputDims, 1, init_rng);
  Adam<Real> dnc_opt(dnc.parameters(), {(Real)cfg.model_lr});
  Adam<Real> lstm_opt(lstm.parameters(), {(Real)cfg.model_lr});

  const int total = 10 * cfg.sequences_per_step;  // step 6 runs 5x longer
  AdditionBenchResult result;
  for (int seq = 1; seq <= total; ++seq) {
    const int step = std::min((seq - 1) / cfg.sequences_per_step, 5) + 1;
    auto sample = addition_generate(step, stream_rng);
    addition_train_one(dnc, dnc_opt, sample, cfg.tbptt_len, (Real)cfg.grad_clip);
    addition_train_one(lstm, lstm_opt, sample, cfg.tbptt_len, (Real)cfg.grad_clip);
    if (seq % cfg.test_every == 0 || seq == total) {
      AdditionBenchRow row;
      row.sequences = seq;
      row.step = step;
      Rng test_rng = root.fork(0x74657374ull ^ (uint64_t)seq);
      Rng test_rng2 = test_rng;  // identical test set for both models
      row.dnc_rmse = addition_bench(
          [&](const AdditionSample& s) { return addition_predict(dnc, s); },
          cfg.test_sequences, step, test_rng);
      row.lstm_rmse = addition_bench(
          [&](const AdditionSample& s) { return addition_predict(lstm, s); },
          cfg.test_sequences, step, test_rng2);
      result.rows.push_back(row);
    }
  }
  result.final_dnc_rmse = result.rows.back().dnc_rmse;
  result.final_lstm_rmse = result.rows.back().lstm_rmse;
  return result;
}

// ---------------------------------------------------------------------------
// CSV logs

void write_model_csv(const std::string& path, const std::vector<ModelEpochLog>& epochs) {
  std::ofstream f(path);
  require(f.good(), "csv: cannot write " + path);
  f << "epoch,total,recon,done,reward,latent\n";
  char line[256];
  for (size_t i = 0; i < epochs.size(); ++i) {
    const auto& e = epochs[i];
    std::snprintf(line, sizeof line, "%zu,%.6f,%.6f,%.6f,%.6f,%.6f\n", i + 1, e.total, e.recon,
                  e.done, e.reward, e.latent);
    f << line;
  }
}

void write_cycles_csv(const std::string& path, const std::vector<CycleLog>& cycles) {
  std::ofstream f(path);
  require(f.good(), "csv: cannot write " + path);
  f << "cycle,sim_return,live_greedy_mean,live_greedy_std,live_sampled_mean,live_sampled_std,"
       "solved\n";
  char line[256];
  for (const auto& c : cycles) {
    std::snprintf(line, sizeof line, "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n", c.cycle, c.sim_return,
                  c.live_greedy_mean, c.live_greedy_std, c.live_sampled_mean, c.live_sampled_std,
                  c.solved ? 1 : 0);
    f << line;
  }
}

void write_addition_csv(const std::string& path, const AdditionBenchResult& result) {
  std::ofstream f(path);
  require(f.good(), "csv: cannot write " + path);
  f << "sequences,step,dnc_rmse,lstm_rmse\n";
  char line[256];
  for (const auto& r : result.rows) {
    std::snprintf(line, sizeof line, "%d,%d,%.6f,%.6f\n", r.sequences, r.step, r.dnc_rmse,
                  r.lstm_rmse);
    f << line;
  }
}

}  // namespace nca
