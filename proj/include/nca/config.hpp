#pragma once

// Every tunable of a run, serialized alongside results for reproducibility.
// Defaults follow the experimental setup this implementation reproduces.

#include <string>

#include "nca/agent.hpp"

namespace nca {

struct RunConfig {
  std::string env = "path";
  uint64_t seed = 1;
  int iterations = 3;

  // outer loop
  int live_rollouts = 1000;      // N_m: experience buffer capacity
  int model_epochs = 10;         // E_m
  int sim_rollouts = 128;        // N_a: simulated rollouts per RL cycle
  int agent_epochs = 5;          // E_a
  int test_rollouts = 100;       // N_t: live test rollouts
  int rl_cycles = 25;            // E_RL cap per iteration
  double retain_fraction = 0.01; // share of N_m kept across iterations
  double done_threshold = 0.75;
  int sim_max_steps = 50;

  // model
  int tbptt_len = 64;
  double model_lr = 1e-4;
  double grad_clip = 10.0;
  int memory_locations = 256;
  int word_width = 64;
  int read_heads = 4;
  int controller_units = 256;
  int latent_dims = 32;
  double w_recon = 1.0, w_done = 1.0, w_reward = 1.0, w_latent = 1.0;

  // agent
  int agent_hidden = 256;
  PpoConfig ppo;

  // addition benchmark
  int sequences_per_step = 5000;
  int test_every = 1000;
  int test_sequences = 1000;

  std::string run_dir = "runs/default";

  void validate() const;
  std::string to_json() const;
  static RunConfig from_json(const std::string& text);

  static RunConfig load(const std::string& path);
  void save(const std::string& path) const;
};

bool operator==(const RunConfig& a, const RunConfig& b);

}  // namespace nca
