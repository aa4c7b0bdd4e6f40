#include "nca/config.hpp"

#include <json.hpp>

#include <fstream>

namespace nca {

using nlohmann::json;

namespace {

json to_json_obj(const RunConfig& c) {
  return json{{"env", c.env},
              {"seed", c.seed},
              {"iterations", c.iterations},
              {"live_rollouts", c.live_rollouts},
              {"model_epochs", c.model_epochs},
              {"sim_rollouts", c.sim_rollouts},
              {"agent_epochs", c.agent_epochs},
              {"test_rollouts", c.test_rollouts},
              {"rl_cycles", c.rl_cycles},
              {"retain_fraction", c.retain_fraction},
              {"done_threshold", c.done_threshold},
              {"sim_max_steps", c.sim_max_steps},
              {"tbptt_len", c.tbptt_len},
              {"model_lr", c.model_lr},
              {"grad_clip", c.grad_clip},
              {"memory_locations", c.memory_locations},
              {"word_width", c.word_width},
              {"read_heads", c.read_heads},
              {"controller_units", c.controller_units},
              {"latent_dims", c.latent_dims},
              {"w_recon", c.w_recon},
              {"w_done", c.w_done},
              {"w_reward", c.w_reward},
              {"w_latent", c.w_latent},
              {"agent_hidden", c.agent_hidden},
              {"ppo_clip", c.ppo.clip},
              {"ppo_gamma", c.ppo.gamma},
              {"ppo_lambda", c.ppo.lambda},
              {"ppo_epochs", c.ppo.epochs},
              {"ppo_lr", c.ppo.lr},
              {"ppo_value_coef", c.ppo.value_coef},
              {"ppo_entropy_coef", c.ppo.entropy_coef},
              {"ppo_minibatch", c.ppo.minibatch},
              {"sequences_per_step", c.sequences_per_step},
              {"test_every", c.test_every},
              {"test_sequences", c.test_sequences},
              {"run_dir", c.run_dir}};
}

template <typename T>
void pick(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
  require(env == "path" || env == "grid", "config: env must be 'path' or 'grid'");
  require(iterations >= 1, "config: iterations must be >= 1");
  require(live_rollouts >= 1 && sim_rollouts >= 1 && test_rollouts >= 1,
          "config: rollout counts must be >= 1");
  require(model_epochs >= 0 && agent_epochs >= 1 && rl_cycles >= 1,
          "config: epoch/cycle counts out of range");
  require(retain_fraction >= 0 && retain_fraction < 1, "config: retain_fraction in [0,1)");
  require(done_threshold > 0 && done_threshold <= 1, "config: done_threshold in (0,1]");
  require(sim_max_steps > 0 && tbptt_len > 0, "config: window sizes must be positive");
  ppo.validate();
}

std::string RunConfig::to_json() const { return to_json_obj(*this).dump(2) + "\n"; }

RunConfig RunConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  RunConfig c;
  pick(j, "env", c.env);
  pick(j, "seed", c.seed);
  pick(j, "iterations", c.iterations);
  pick(j, "live_rollouts", c.live_rollouts);
  pick(j, "model_epochs", c.model_epochs);
  pick(j, "sim_rollouts", c.sim_rollouts);
  pick(j, "agent_epochs", c.agent_epochs);
  pick(j, "test_rollouts", c.test_rollouts);
  pick(j, "rl_cycles", c.rl_cycles);
  pick(j, "retain_fraction", c.retain_fraction);
  pick(j, "done_threshold", c.done_threshold);
  pick(j, "sim_max_steps", c.sim_max_steps);
  pick(j, "tbptt_len", c.tbptt_len);
  pick(j, "model_lr", c.model_lr);
  pick(j, "grad_clip", c.grad_clip);
  pick(j, "memory_locations", c.memory_locations);
  pick(j, "word_width", c.word_width);
  pick(j, "read_heads", c.read_heads);
  pick(j, "controller_units", c.controller_units);
  pick(j, "latent_dims", c.latent_dims);
  pick(j, "w_recon", c.w_recon);
  pick(j, "w_done", c.w_done);
  pick(j, "w_reward", c.w_reward);
  pick(j, "w_latent", c.w_latent);
  pick(j, "agent_hidden", c.agent_hidden);
  pick(j, "ppo_clip", c.ppo.clip);
  pick(j, "ppo_gamma", c.ppo.gamma);
  pick(j, "ppo_lambda", c.ppo.lambda);
  pick(j, "ppo_epochs", c.ppo.epochs);
  pick(j, "ppo_lr", c.ppo.lr);
  pick(j, "ppo_value_coef", c.ppo.value_coef);
  pick(j, "ppo_entropy_coef", c.ppo.entropy_coef);
  pick(j, "ppo_minibatch", c.ppo.minibatch);
  pick(j, "sequences_per_step", c.sequences_per_step);
  pick(j, "test_every", c.test_every);
  pick(j, "test_sequences", c.test_sequences);
  pick(j, "run_dir", c.run_dir);
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_json(text);
}

void RunConfig::save(const std::string& path) const {
  std::ofstream f(path);
  require(f.good(), "config: cannot write " + path);
  f << to_json();
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  return to_json_obj(a) == to_json_obj(b);
}

}  // namespace nca
