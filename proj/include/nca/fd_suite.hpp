#pragma once

// Finite-difference verification across every differentiable component:
// tensor primitives, LSTM, DNC (tiny config, unrolled), the reduced
// autoencoder, and the composed world-model loss. Runs in double so the
// oracle itself contributes no measurable noise; the gradient rules under
// test are the same templated code the float build instantiates.
//
// The world-model loss stops gradients into the encoder everywhere except
// the reconstruction term, so its check runs twice: once against all
// loss terms for the DNC and decoder parameters, and once against the
// reconstruction term alone for the encoder parameters (the only path the
// analytic gradient is defined to follow).

#include "nca/gradcheck.hpp"
#include "nca/world_model.hpp"

namespace nca {

struct FdReport {
  std::string component;
  double max_err = 0;
  int seeds = 0;
};

namespace fd_detail {

template <typename S>
Tensor<S> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  ArrayX<S> a(numel(shape));
  for (long i = 0; i < a.size(); ++i) a[i] = (S)rng.uniform(lo, hi);
  return Tensor<S>::from_array(std::move(shape), std::move(a));
}

}  // namespace fd_detail

// every tensor primitive, randomized inputs kept away from kinks
template <typename S>
FdReport fd_primitives(int seeds, uint64_t salt = 17) {
  using fd_detail::random_tensor;
  FdReport rep{"tensor primitives", 0, 0};
  for (int seed = 0; seed < seeds; ++seed) {
    Rng rng(salt + seed);
    auto a = random_tensor<S>({3, 4}, rng);
    auto b = random_tensor<S>({3, 4}, rng);
    auto v = random_tensor<S>({4}, rng);
    auto u = random_tensor<S>({3}, rng);
    auto s = random_tensor<S>({1}, rng);
    auto pos = random_tensor<S>({5}, rng, 0.2, 2.0);
    auto prob = random_tensor<S>({6}, rng, 0.1, 0.9);
    auto target = random_tensor<S>({6}, rng, 0.0, 1.0);
    auto off = random_tensor<S>({7}, rng, 0.3, 1.5);  // away from the relu kink
    auto img = random_tensor<S>({2, 6, 6}, rng);
    auto ker = random_tensor<S>({3, 2, 3, 3}, rng);
    auto kbias = random_tensor<S>({3}, rng);
    auto tker = random_tensor<S>({2, 3, 3, 3}, rng);
    auto tbias = random_tensor<S>({3}, rng);
    // usage values spread apart so finite differences never cross a sort tie
    auto usage = Tensor<S>::zeros({6});
    {
      std::vector<int> perm{0, 1, 2, 3, 4, 5};
      for (int i = 5; i > 0; --i) std::swap(perm[i], perm[rng.randint(i + 1)]);
      for (int i = 0; i < 6; ++i)
        usage.value()[perm[i]] = (S)(0.1 + 0.13 * i + rng.uniform(-0.02, 0.02));
    }
    auto link = random_tensor<S>({5, 5}, rng, 0.0, 0.15);
    auto ww = random_tensor<S>({5}, rng, 0.0, 0.15);
    auto prec = random_tensor<S>({5}, rng, 0.0, 0.15);
    auto low = random_tensor<S>({7}, rng, -0.4, 0.4);   // strictly inside clamp bounds
    auto high = random_tensor<S>({7}, rng, 0.6, 1.4);   // strictly outside
    auto wide = random_tensor<S>({7}, rng, 1.6, 2.4);   // never the minimum
    std::vector<std::pair<std::function<Tensor<S>()>, std::vector<Tensor<S>>>> cases = {
        {[&] { return mean(a + b); }, {a, b}},
        {[&] { return mean(a - b); }, {a, b}},
        {[&] { return mean(a * b); }, {a, b}},
        {[&] { return mean(a * s); }, {a, s}},
        {[&] { return mean(a + v); }, {a, v}},   // row broadcast
        {[&] { return mean(a * v); }, {a, v}},
        {[&] { return mean(S(2) - a); }, {a}},
        {[&] { return mean(matmul(a, v)); }, {a, v}},
        {[&] { return mean(matmul_nt(a, reshape(v * S(1), {1, 4}))); }, {a, v}},
        {[&] { return mean(tmatvec(a, u)); }, {a, u}},
        {[&] { return mean(outer(u, v)); }, {u, v}},
        {[&] { return dot(u, u * S(2)); }, {u}},
        {[&] { return mean(sigmoid(a)); }, {a}},
        {[&] { return mean(tanh(a)); }, {a}},
        {[&] { return mean(relu(off)); }, {off}},
        {[&] { return mean(softplus(a)); }, {a}},
        {[&] { return mean(exp(a)); }, {a}},
        {[&] { return mean(log(pos)); }, {pos}},
        {[&] { return mean(square(a)); }, {a}},
        {[&] { return dot(softmax(v), v.detach()); }, {v}},
        {[&] { return mean(softmax(a, 1) * b.detach()); }, {a}},
        {[&] { return mean(softmax(a, 0) * b.detach()); }, {a}},
        {[&] { return mean(log_softmax(a) * b.detach()); }, {a}},
        {[&] { return mean(cosine_rows(a, v)); }, {a, v}},
        {[&] { return mean(concat<S>({u, v})); }, {u, v}},
        {[&] { return mean(slice(v, 1, 2)); }, {v}},
        {[&] { return mean(reshape(a, {4, 3})); }, {a}},
        {[&] { return sum(u) + mean(u); }, {u}},
        {[&] { return mean(sum_rows(a)); }, {a}},
        {[&] { return mean(gather_rows(a, {1, 3, 0})); }, {a}},
        {[&] { return mean(minimum(low, wide)); }, {low, wide}},
        {[&] { return mean(minimum(wide, low)); }, {low, wide}},
        {[&] { return mean(clamp(low, S(-0.5), S(0.5)) * low.detach()); }, {low}},
        {[&] { return mean(clamp(high, S(-0.5), S(0.5)) + high); }, {high}},
        {[&] { return mean(conv2d(img, ker, kbias, 1)); }, {img, ker, kbias}},
        {[&] { return mean(conv2d(img, ker, kbias, 2)); }, {img, ker, kbias}},
        {[&] { return mean(conv2d_transpose(img, tker, tbias, 2, 13, 13)); }, {img, tker, tbias}},
        {[&] { return bernoulli_nll(prob, target); }, {prob}},
        {[&] { return mean(allocation_weighting(usage)); }, {usage}},
        {[&] { return mean(temporal_link_update(link, ww, prec) * link); }, {link, ww, prec}},
    };
    for (auto& [f, xs] : cases) rep.max_err = std::max(rep.max_err, (double)grad_check<S>(f, xs));
    ++rep.seeds;
  }
  return rep;
}

template <typename S>
FdReport fd_lstm(int seeds, uint64_t salt = 31) {
  using fd_detail::random_tensor;
  FdReport rep{"lstm", 0, 0};
  for (int seed = 0; seed < seeds; ++seed) {
    Rng rng(salt + seed);
    LstmModel<S> model(5, 3, 2, rng);
    std::vector<Tensor<S>> inputs;
    for (int t = 0; t < 3; ++t) inputs.push_back(random_tensor<S>({3}, rng));
    auto f = [&] {
      auto state = model.initial_state();
      Tensor<S> acc;
      for (int t = 0; t < 3; ++t) {
        auto [y, s2] = model(state, inputs[t]);
        state = s2;
        acc = t == 0 ? mean(y) : acc + mean(y);
      }
      return acc;
    };
    auto xs = model.parameters();
    xs.insert(xs.end(), inputs.begin(), inputs.end());
    rep.max_err = std::max(rep.max_err, (double)grad_check<S>(f, xs));
    ++rep.seeds;
  }
  return rep;
}

inline DncConfig tiny_dnc_config(int in = 4, int out = 3) {
  DncConfig cfg;
  cfg.memory_locations = 4;
  cfg.word_width = 3;
  cfg.read_heads = 1;
  cfg.controller_units = 6;
  cfg.input_size = in;
  cfg.output_size = out;
  return cfg;
}

// three steps through time; checked against every parameter and the initial
// memory matrix
template <typename S>
FdReport fd_dnc(int seeds, uint64_t salt = 47) {
  using fd_detail::random_tensor;
  FdReport rep{"dnc", 0, 0};
  for (int seed = 0; seed < seeds; ++seed) {
    Rng rng(salt + seed);
    DncCell<S> cell(tiny_dnc_config(), rng);
    auto m0 = random_tensor<S>({4, 3}, rng, -0.5, 0.5);
    std::vector<Tensor<S>> inputs;
    for (int t = 0; t < 3; ++t) inputs.push_back(random_tensor<S>({4}, rng));
    auto f = [&] {
      auto state = cell.initial_state();
      state.memory = m0 * S(1);  // differentiable view of the leaf
      Tensor<S> acc;
      for (int t = 0; t < 3; ++t) {
        auto [y, s2] = cell(state, inputs[t]);
        state = s2;
        acc = t == 0 ? mean(y) : acc + mean(y);
      }
      return acc;
    };
    auto xs = cell.parameters();
    xs.push_back(m0);
    xs.insert(xs.end(), inputs.begin(), inputs.end());
    rep.max_err = std::max(rep.max_err, (double)grad_check<S>(f, xs));
    ++rep.seeds;
  }
  return rep;
}

inline CaeConfig reduced_cae_config() {
  CaeConfig cfg;
  cfg.input_size = 8;
  cfg.convs = {{4, 3, 1}, {4, 2, 2}};  // 8 -> 6 -> 3
  cfg.dense_units = 16;
  cfg.latent_dims = 8;
  return cfg;
}

template <typename S>
FdReport fd_cae(int seeds, uint64_t salt = 67) {
  using fd_detail::random_tensor;
  FdReport rep{"cae", 0, 0};
  for (int seed = 0; seed < seeds; ++seed) {
    Rng rng(salt + seed);
    Autoencoder<S> cae(reduced_cae_config(), rng);
    auto frame = random_tensor<S>({1, 8, 8}, rng, 0.1, 0.9);
    auto f = [&] { return bernoulli_nll(cae.decode(cae.encode(frame)), frame.detach()); };
    rep.max_err = std::max(rep.max_err, (double)grad_check<S>(f, cae.parameters()));
    ++rep.seeds;
  }
  return rep;
}

template <typename S>
Rollout fd_synthetic_rollout(Rng& rng, int steps, int frame_size, int num_actions) {
  Rollout ro;
  for (int t = 0; t <= steps; ++t) {
    Frame f(frame_size, frame_size);
    for (long i = 0; i < f.size(); ++i) f.data()[i] = (float)rng.uniform(0.05, 0.95);
    ro.frames.push_back(std::move(f));
  }
  for (int t = 0; t < steps; ++t) {
    ro.actions.push_back(rng.randint(num_actions));
    ro.rewards.push_back((float)rng.uniform(-1.0, 1.0));
    ro.dones.push_back(t == steps - 1);
  }
  return ro;
}

template <typename S>
WorldModel<S> tiny_world_model(Rng& rng) {
  CaeConfig cae = reduced_cae_config();
  DncConfig dnc = tiny_dnc_config();
  return WorldModel<S>(cae, dnc, 2, rng);
}

template <typename S>
FdReport fd_world_model(int seeds, uint64_t salt = 89) {
  FdReport rep{"world-model loss", 0, 0};
  for (int seed = 0; seed < seeds; ++seed) {
    Rng rng(salt + seed);
    auto model = tiny_world_model<S>(rng);
    auto ro = fd_synthetic_rollout<S>(rng, 3, 8, 2);

    auto loss_with = [&](LossWeights<S> w) {
      return [&model, &ro, w] {
        auto state = model.initial_state();
        return model_loss(model, ro, 0, ro.steps(), state, w).total;
      };
    };
    // full loss for parameters the analytic gradient reaches on every path
    std::vector<Tensor<S>> rest = model.dnc.parameters();
    {
      std::vector<Tensor<S>> dps;
      model.cae.dec_fc1.collect(dps);
      model.cae.dec_fc2.collect(dps);
      for (size_t i = 0; i < model.cae.dec_w.size(); ++i) {
        dps.push_back(model.cae.dec_w[i]);
        dps.push_back(model.cae.dec_b[i]);
      }
      rest.insert(rest.end(), dps.begin(), dps.end());
    }
    rep.max_err = std::max(rep.max_err, (double)grad_check<S>(loss_with(LossWeights<S>{}), rest));
    // encoder parameters only see the reconstruction term
    std::vector<Tensor<S>> enc;
    for (size_t i = 0; i < model.cae.enc_w.size(); ++i) {
      enc.push_back(model.cae.enc_w[i]);
      enc.push_back(model.cae.enc_b[i]);
    }
    model.cae.enc_fc1.collect(enc);
    model.cae.enc_fc2.collect(enc);
    rep.max_err = std::max(
        rep.max_err, (double)grad_check<S>(loss_with(LossWeights<S>{1, 0, 0, 0}), enc));
    ++rep.seeds;
  }
  return rep;
}

template <typename S>
std::vector<FdReport> run_fd_suite(int primitive_seeds = 3, int module_seeds = 3) {
  return {fd_primitives<S>(primitive_seeds), fd_lstm<S>(module_seeds), fd_dnc<S>(module_seeds),
          fd_cae<S>(module_seeds), fd_world_model<S>(module_seeds)};
}

}  // namespace nca
