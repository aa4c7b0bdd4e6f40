#pragma once

// The iteration loop: live collection, model training, RL cycles of
// simulate -> PPO -> live test, with curriculum locks advanced on solve.

#include "nca/agent.hpp"
#include "nca/config.hpp"
#include "nca/envs/env.hpp"
#include "nca/world_model.hpp"

namespace nca {

struct CycleLog {
  int cycle = 0;
  double sim_return = 0;
  double live_greedy_mean = 0, live_greedy_std = 0;
  double live_sampled_mean = 0, live_sampled_std = 0;
  bool solved = false;
};

struct IterationReport {
  int iteration = 0;
  int lock_level = 1;
  int buffer_fresh = 0, buffer_retained = 0;
  std::vector<ModelEpochLog> model_epochs;
  std::vector<CycleLog> cycles;
  bool solved = false;
};

struct EvalResult {
  double mean = 0, stddev = 0;
};

class Orchestrator {
 public:
  explicit Orchestrator(RunConfig cfg);

  // one Algorithm-1 outer step
  IterationReport run_iteration();

  // cfg.iterations outer steps with CSV logs, checkpoints and collages
  std::vector<IterationReport> run();

  // pieces, exposed for tests and the CLI
  Rollout collect_rollout(ActMode mode);
  std::vector<Rollout> collect_live(int n);
  EvalResult live_eval(int n, ActMode mode);
  PpoBatch build_sim_batch(int n_rollouts, double* mean_return);
  SimRollout simulate_greedy(int max_steps);

  // injects a fixed action script in place of the agent (oracle harness)
  EvalResult live_eval_scripted(int n, const std::vector<int>& actions);

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

  const WorldModel<Real>& model() const { return model_; }
  WorldModel<Real>& model() { return model_; }
  const AgentNet<Real>& agent() const { return agent_; }
  Env& env() { return *env_; }
  int iteration() const { return iteration_; }
  int lock() const { return lock_; }
  const std::vector<Rollout>& buffer() const { return buffer_; }
  const std::vector<Rollout>& retained() const { return retained_; }
  const RunConfig& config() const { return cfg_; }
  Rng& rng() { return rng_; }

  // observation fed to the agent at the current live step
  Eigen::ArrayXf live_obs(const Tensor<Real>& z, const DncState<Real>& state) const;

 private:
  RunConfig cfg_;
  std::unique_ptr<Env> env_;
  WorldModel<Real> model_;
  Adam<Real> model_opt_;
  AgentNet<Real> agent_;
  Adam<Real> agent_opt_;
  Rng rng_;
  std::vector<Rollout> buffer_;
  std::vector<Rollout> retained_;
  int iteration_ = 1;
  int lock_ = 1;
};

// DNC-vs-LSTM curriculum benchmark; one row per test checkpoint
struct AdditionBenchRow {
  int sequences = 0;
  int step = 0;  // 1-based curriculum step under test
  double dnc_rmse = 0;
  double lstm_rmse = 0;
};

struct AdditionBenchResult {
  std::vector<AdditionBenchRow> rows;
  double final_dnc_rmse = 0;
  double final_lstm_rmse = 0;
};

AdditionBenchResult run_addition_benchmark(const RunConfig& cfg);

void write_cycles_csv(const std::string& path, const std::vector<CycleLog>& cycles);
void write_model_csv(const std::string& path, const std::vector<ModelEpochLog>& epochs);
void write_addition_csv(const std::string& path, const AdditionBenchResult& result);

}  // namespace nca
