#pragma once

// Feedforward policy/value network over [z, h, c] observations, trained with
// clipped-surrogate PPO on simulated rollouts.

#include "nca/adam.hpp"
#include "nca/nn.hpp"
#include "nca/rng.hpp"
#include "nca/tensor.hpp"

namespace nca {

template <typename S>
struct AgentNet {
  Dense<S> hidden;       // obs -> 256
  Dense<S> policy_head;  // 256 -> |A|
  Dense<S> value_head;   // 256 -> 1
  int obs_dims = 0, num_actions = 0;

  AgentNet() = default;
  AgentNet(int obs, int actions, int units, Rng& rng)
      : hidden(units, obs, rng),
        policy_head(actions, units, rng),
        value_head(1, units, rng),
        obs_dims(obs),
        num_actions(actions) {}

  Tensor<S> trunk(const Tensor<S>& obs) const { return tanh(hidden(obs)); }

  std::vector<Tensor<S>> parameters() const {
    std::vector<Tensor<S>> ps;
    hidden.collect(ps);
    policy_head.collect(ps);
    value_head.collect(ps);
    return ps;
  }
};

struct PpoConfig {
  double clip = 0.1;
  double gamma = 0.99;
  double lambda = 0.95;
  int epochs = 5;
  double lr = 1e-4;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  int minibatch = 64;

  void validate() const {
    require(clip > 0, "ppo: clip must be positive");
    require(gamma > 0 && gamma <= 1 && lambda > 0 && lambda <= 1,
            "ppo: gamma and lambda must lie in (0,1]");
  }
};

enum class ActMode { Sample, Greedy };

struct ActResult {
  int action;
  float log_prob;
  float value;
};

// Greedy ties resolve to the lowest action id.
template <typename S>
ActResult act(const AgentNet<S>& net, const Eigen::ArrayXf& obs, ActMode mode, Rng& rng) {
  require((int)obs.size() == net.obs_dims, "act: observation width " +
                                               std::to_string(obs.size()) + " != {" +
                                               std::to_string(net.obs_dims) + "}");
  ArrayX<S> o(obs.size());
  for (long i = 0; i < obs.size(); ++i) o[i] = (S)obs[i];
  auto x = Tensor<S>::from_array({net.obs_dims}, std::move(o));
  auto h = net.trunk(x);
  auto logp = log_softmax(net.policy_head(h));
  auto v = net.value_head(h);
  int action = 0;
  if (mode == ActMode::Greedy) {
    for (long i = 1; i < logp.size(); ++i)
      if (logp[i] > logp[action]) action = (int)i;
  } else {
    double u = rng.uniform(), acc = 0;
    action = (int)logp.size() - 1;
    for (long i = 0; i < logp.size(); ++i) {
      acc += std::exp((double)logp[i]);
      if (u < acc) {
        action = (int)i;
        break;
      }
    }
  }
  return {action, (float)logp[action], (float)v.item()};
}

// ---------------------------------------------------------------------------
// generalized advantage estimation
// delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t, bootstrap 0 past the end

struct GaeResult {
  std::vector<float> advantages;
  std::vector<float> returns;
};

inline GaeResult gae(const std::vector<float>& rewards, const std::vector<float>& values,
                     const std::vector<uint8_t>& dones, double gamma, double lambda) {
  const size_t n = rewards.size();
  require(values.size() == n && dones.size() == n, "gae: sequence lengths differ");
  GaeResult out;
  out.advantages.resize(n);
  out.returns.resize(n);
  double acc = 0;
  for (long t = (long)n - 1; t >= 0; --t) {
    const double v_next = (t + 1 < (long)n && !dones[t]) ? values[t + 1] : 0.0;
    const double delta = rewards[t] + gamma * v_next - values[t];
    acc = delta + gamma * lambda * (dones[t] ? 0.0 : acc);
    out.advantages[t] = (float)acc;
    out.returns[t] = (float)(acc + values[t]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// PPO update over a flat transition batch

struct PpoBatch {
  std::vector<Eigen::ArrayXf> obs;
  std::vector<int> actions;
  std::vector<float> old_log_probs;
  std::vector<float> advantages;  // normalized inside ppo_update
  std::vector<float> returns;
};

struct PpoStats {
  double policy_loss = 0, value_loss = 0, entropy = 0;
  int minibatches = 0;
};

// Clipped surrogate on one minibatch; exposed so tests can probe the
// arithmetic directly. Ratios always come from the stored old log-probs.
template <typename S>
Tensor<S> ppo_surrogate_loss(const AgentNet<S>& net, const Tensor<S>& obs,
                             const std::vector<int>& actions, const Tensor<S>& old_logp,
                             const Tensor<S>& adv, const Tensor<S>& returns,
                             const PpoConfig& cfg, PpoStats* stats = nullptr) {
  const int b = obs.dim(0);
  auto h = tanh(matmul_nt(obs, net.hidden.w) + net.hidden.b);
  auto logp_all = log_softmax(matmul_nt(h, net.policy_head.w) + net.policy_head.b);
  auto logp = gather_rows(logp_all, actions);
  auto ratio = exp(logp - old_logp);
  auto clipped = clamp(ratio, (S)(1.0 - cfg.clip), (S)(1.0 + cfg.clip));
  auto surrogate = minimum(ratio * adv, clipped * adv);
  auto policy_loss = S(-1) * mean(surrogate);
  auto v = reshape(matmul_nt(h, net.value_head.w) + net.value_head.b, {b});
  auto value_loss = mean(square(v - returns));
  auto entropy = S(-1) * mean(sum_rows(exp(logp_all) * logp_all));
  if (stats) {
    stats->policy_loss += (double)policy_loss.item();
    stats->value_loss += (double)value_loss.item();
    stats->entropy += (double)entropy.item();
    ++stats->minibatches;
  }
  return policy_loss + (S)cfg.value_coef * value_loss - (S)cfg.entropy_coef * entropy;
}

template <typename S>
PpoStats ppo_update(const AgentNet<S>& net, Adam<S>& opt, PpoBatch batch, const PpoConfig& cfg,
                    Rng& rng) {
  cfg.validate();
  const size_t n = batch.obs.size();
  require(n > 0, "ppo_update: empty batch");
  require(batch.actions.size() == n && batch.old_log_probs.size() == n &&
              batch.advantages.size() == n && batch.returns.size() == n,
          "ppo_update: field lengths differ");

  if (n > 1) {
    double mu = 0, var = 0;
    for (float a : batch.advantages) mu += a;
    mu /= (double)n;
    for (float a : batch.advantages) var += (a - mu) * (a - mu);
    double sd = std::sqrt(var / (double)n);
    for (float& a : batch.advantages) a = (float)((a - mu) / (sd + 1e-8));
  }

  PpoStats stats;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = (int)n - 1; i > 0; --i) std::swap(order[i], order[rng.randint(i + 1)]);
    for (size_t at = 0; at < n; at += cfg.minibatch) {
      const size_t b = std::min((size_t)cfg.minibatch, n - at);
      ArrayX<S> obs((long)b * net.obs_dims), olp(b), adv(b), ret(b);
      std::vector<int> acts(b);
      for (size_t i = 0; i < b; ++i) {
        const auto& o = batch.obs[order[at + i]];
        for (int j = 0; j < net.obs_dims; ++j) obs[(long)i * net.obs_dims + j] = (S)o[j];
        acts[i] = batch.actions[order[at + i]];
        olp[i] = (S)batch.old_log_probs[order[at + i]];
        adv[i] = (S)batch.advantages[order[at + i]];
        ret[i] = (S)batch.returns[order[at + i]];
      }
      Tape<S> tape;
      auto loss = ppo_surrogate_loss(
          net, Tensor<S>::from_array({(int)b, net.obs_dims}, std::move(obs)), acts,
          Tensor<S>::from_array({(int)b}, std::move(olp)),
          Tensor<S>::from_array({(int)b}, std::move(adv)),
          Tensor<S>::from_array({(int)b}, std::move(ret)), cfg, &stats);
      tape.backward(loss);
      opt.step();
    }
  }
  if (stats.minibatches) {
    stats.policy_loss /= stats.minibatches;
    stats.value_loss /= stats.minibatches;
    stats.entropy /= stats.minibatches;
  }
  return stats;
}

}  // namespace nca
