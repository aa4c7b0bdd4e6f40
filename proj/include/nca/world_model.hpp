#pragma once

// DNC-based predictive model: consumes [z_t, one-hot action_t], emits
// (z_{t+1}, reward_{t+1}, done_{t+1}). Trained end to end with the
// autoencoder; simulation runs the loop closed entirely in latent space.

#include <functional>

#include "nca/adam.hpp"
#include "nca/dnc.hpp"
#include "nca/vision.hpp"

namespace nca {

// Aligned sequences from live or simulated play. frames has one more entry
// than the step-indexed fields; a completed rollout is terminal at its end.
struct Rollout {
  std::vector<Frame> frames;    // T+1
  std::vector<int> actions;     // T
  std::vector<float> rewards;   // T
  std::vector<uint8_t> dones;   // T
  bool simulated = false;

  int steps() const { return (int)actions.size(); }

  void validate() const {
    require(frames.size() == actions.size() + 1 && rewards.size() == actions.size() &&
                dones.size() == actions.size() && !actions.empty(),
            "rollout: inconsistent sequence lengths");
    for (size_t i = 0; i + 1 < dones.size(); ++i)
      require(!dones[i], "rollout: done flag before the terminal step");
    require(dones.back(), "rollout: completed rollout must end terminal");
  }
};

template <typename S>
struct ModelPrediction {
  Tensor<S> z_next;     // {latent}
  Tensor<S> reward;     // {1}
  Tensor<S> done_prob;  // {1}, sigmoid
};

template <typename S>
struct LossWeights {
  S recon = 1, done = 1, reward = 1, latent = 1;
};

template <typename S>
struct WorldModel {
  Autoencoder<S> cae;
  DncCell<S> dnc;
  int num_actions = 0;
  int latent_dims = 32;

  WorldModel() = default;

  WorldModel(CaeConfig cae_cfg, DncConfig dnc_cfg, int actions, Rng& rng)
      : num_actions(actions), latent_dims(cae_cfg.latent_dims) {
    cae = Autoencoder<S>(cae_cfg, rng);
    dnc_cfg.input_size = latent_dims + num_actions;
    dnc_cfg.output_size = latent_dims + 2;
    dnc = DncCell<S>(dnc_cfg, rng);
  }

  DncState<S> initial_state() const { return dnc.initial_state(); }

  Tensor<S> one_hot(int action) const {
    require(action >= 0 && action < num_actions,
            "model: invalid action id " + std::to_string(action));
    auto t = Tensor<S>::zeros({num_actions});
    t.value()[action] = S(1);
    return t;
  }

  // One prediction step; output splits fixed as [latent | reward | done].
  std::pair<ModelPrediction<S>, DncState<S>> step(const DncState<S>& state, const Tensor<S>& z,
                                                  int action) const {
    auto [y, next] = dnc(state, concat<S>({z, one_hot(action)}));
    ModelPrediction<S> p;
    p.z_next = slice(y, 0, latent_dims);
    p.reward = slice(y, latent_dims, 1);
    p.done_prob = sigmoid(slice(y, latent_dims + 1, 1));
    return {p, next};
  }

  std::vector<Tensor<S>> parameters() const {
    auto ps = cae.parameters();
    auto dp = dnc.parameters();
    ps.insert(ps.end(), dp.begin(), dp.end());
    return ps;
  }
};

// ---------------------------------------------------------------------------
// loss over one TBPTT window

template <typename S>
struct LossBreakdown {
  Tensor<S> total;
  double recon = 0, done = 0, reward = 0, latent = 0;

  double weighted_total(const LossWeights<S>& w) const {
    return w.recon * recon + w.done * done + w.reward * reward + w.latent * latent;
  }
};

// Window covers steps [t0, t1). The reconstruction term covers the window's
// input frames, plus the final observation when the window closes the
// rollout. Gradient reaches the encoder through reconstruction only: latent
// inputs and latent targets are detached before they touch the DNC graph.
template <typename S>
LossBreakdown<S> model_loss(const WorldModel<S>& model, const Rollout& ro, int t0, int t1,
                            DncState<S>& state, const LossWeights<S>& w) {
  require(t0 >= 0 && t1 > t0 && t1 <= ro.steps(), "model_loss: bad window bounds");
  const bool closes = t1 == ro.steps();
  const int frames_end = closes ? t1 + 1 : t1;  // frames [t0, frames_end)

  std::vector<Tensor<S>> z(t1 + 1 - t0);
  Tensor<S> recon_sum, done_sum, reward_sum, latent_sum;
  int recon_count = 0;
  for (int t = t0; t <= t1; ++t) {
    auto zt = model.cae.encode(frame_to_tensor<S>(ro.frames[t]));
    z[t - t0] = zt;
    if (t < frames_end) {
      auto nll = bernoulli_nll(model.cae.decode(zt), frame_to_tensor<S>(ro.frames[t]));
      recon_sum = recon_count == 0 ? nll : recon_sum + nll;
      ++recon_count;
    }
  }
  for (int t = t0; t < t1; ++t) {
    auto [pred, next] = model.step(state, z[t - t0].detach(), ro.actions[t]);
    state = next;
    auto dz = pred.z_next - z[t + 1 - t0].detach();
    auto lat = mean(dz * dz);
    auto rew = square(pred.reward - Tensor<S>::scalar((S)ro.rewards[t]));
    auto don = bernoulli_nll(pred.done_prob, Tensor<S>::scalar(ro.dones[t] ? S(1) : S(0)));
    latent_sum = t == t0 ? lat : latent_sum + lat;
    reward_sum = t == t0 ? rew : reward_sum + rew;
    done_sum = t == t0 ? don : done_sum + don;
  }
  const S steps = (S)(t1 - t0);
  LossBreakdown<S> out;
  auto recon = recon_sum * (S(1) / (S)recon_count);
  auto done = done_sum * (S(1) / steps);
  auto reward = reward_sum * (S(1) / steps);
  auto latent = latent_sum * (S(1) / steps);
  out.recon = (double)recon.item();
  out.done = (double)done.item();
  out.reward = (double)reward.item();
  out.latent = (double)latent.item();
  out.total = w.recon * recon + w.done * done + w.reward * reward + w.latent * latent;
  return out;
}

// [0,64),[64,128),... window bounds over a rollout of length n
inline std::vector<std::pair<int, int>> tbptt_windows(int n, int window) {
  require(n > 0 && window > 0, "tbptt_windows: lengths must be positive");
  std::vector<std::pair<int, int>> w;
  for (int t = 0; t < n; t += window) w.emplace_back(t, std::min(t + window, n));
  return w;
}

template <typename S>
struct ModelTrainConfig {
  int epochs = 10;
  int tbptt_len = 64;
  S grad_clip = 10;
  LossWeights<S> weights;
};

struct ModelEpochLog {
  double total = 0, recon = 0, done = 0, reward = 0, latent = 0;
};

// One optimizer step per window; recurrent state carries across windows of a
// rollout, detached from the gradient, and resets at rollout boundaries.
template <typename S>
std::vector<ModelEpochLog> train_model(const WorldModel<S>& model, Adam<S>& opt,
                                       const std::vector<Rollout>& buffer,
                                       const ModelTrainConfig<S>& cfg, Rng& rng) {
  require(!buffer.empty(), "train_model: empty experience buffer");
  std::vector<ModelEpochLog> logs;
  std::vector<int> order(buffer.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = (int)order.size() - 1; i > 0; --i)
      std::swap(order[i], order[rng.randint(i + 1)]);
    ModelEpochLog log;
    long windows = 0;
    for (int ri : order) {
      const Rollout& ro = buffer[ri];
      auto state = model.initial_state();
      for (auto [t0, t1] : tbptt_windows(ro.steps(), cfg.tbptt_len)) {
        Tape<S> tape;
        auto lb = model_loss(model, ro, t0, t1, state, cfg.weights);
        tape.backward(lb.total);
        clip_global_norm(opt.params(), cfg.grad_clip);
        opt.step();
        state = state.detach();
        log.total += (double)lb.total.item();
        log.recon += lb.recon;
        log.done += lb.done;
        log.reward += lb.reward;
        log.latent += lb.latent;
        ++windows;
      }
    }
    log.total /= windows;
    log.recon /= windows;
    log.done /= windows;
    log.reward /= windows;
    log.latent /= windows;
    logs.push_back(log);
  }
  return logs;
}

// ---------------------------------------------------------------------------
// closed-loop simulation in latent space

struct SimRollout {
  std::vector<Eigen::ArrayXf> latents;  // T+1, model-predicted after index 0
  std::vector<Eigen::ArrayXf> obs;      // T, [z_t, h_t, c_t] as seen by the agent
  std::vector<int> actions;             // T
  std::vector<float> rewards;           // T, predicted
  std::vector<float> done_probs;        // T

  int steps() const { return (int)actions.size(); }
};

using SimPolicy = std::function<int(const Eigen::ArrayXf& obs)>;

// Runs until done_prob >= threshold or max_steps. No tape is active: values
// only. The observation at step t pairs z_t with the controller state that
// will consume action_t.
inline SimRollout simulate(const WorldModel<Real>& model, const SimPolicy& policy,
                           const Frame& seed_frame, double done_threshold = 0.75,
                           int max_steps = 50) {
  require(max_steps > 0, "simulate: max_steps must be positive");
  SimRollout sim;
  auto z = model.cae.encode(frame_to_tensor<Real>(seed_frame));
  auto state = model.initial_state();
  sim.latents.push_back(z.value());
  for (int t = 0; t < max_steps; ++t) {
    Eigen::ArrayXf obs(z.size() + state.h.size() + state.c.size());
    obs << z.value(), state.h.value(), state.c.value();
    const int action = policy(obs);
    auto [pred, next] = model.step(state, z, action);
    sim.obs.push_back(obs);
    sim.actions.push_back(action);
    sim.rewards.push_back(pred.reward.item());
    sim.done_probs.push_back(pred.done_prob.item());
    z = pred.z_next;
    state = next;
    sim.latents.push_back(z.value());
    if (pred.done_prob.item() >= (Real)done_threshold) break;
  }
  return sim;
}

// Teacher forcing: the live action sequence is replayed while latents stay
// closed-loop, mirroring the live-vs-simulated collages.
inline SimRollout replay_actions(const WorldModel<Real>& model, const Frame& seed_frame,
                                 const std::vector<int>& actions, int extra_steps = 0) {
  size_t i = 0;
  std::vector<int> seq = actions;
  for (int e = 0; e < extra_steps && !actions.empty(); ++e) seq.push_back(actions.back());
  auto policy = [&i, &seq](const Eigen::ArrayXf&) { return seq[i++]; };
  return simulate(model, policy, seed_frame, 2.0 /* never triggers */, (int)seq.size());
}

}  // namespace nca
