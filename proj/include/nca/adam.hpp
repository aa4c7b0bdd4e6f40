#pragma once

// Adam with bias correction over a fixed parameter set. Gradients are zeroed
// after each step so windows/minibatches do not leak into one another.

#include "nca/tensor.hpp"

namespace nca {

template <typename S>
struct AdamConfig {
  S lr = S(1e-4);
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S eps = S(1e-8);
};

template <typename S>
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Tensor<S>> params, AdamConfig<S> cfg = {})
      : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.push_back(ArrayX<S>::Zero(p.size()));
      v_.push_back(ArrayX<S>::Zero(p.size()));
    }
  }

  void step() {
    ++t_;
    const S bc1 = S(1) - std::pow(cfg_.beta1, (S)t_);
    const S bc2 = S(1) - std::pow(cfg_.beta2, (S)t_);
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      require(p.has_grad(), "adam: parameter " + std::to_string(i) + " has no gradient");
      const auto& g = p.node()->grad;
      m_[i] = cfg_.beta1 * m_[i] + (S(1) - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (S(1) - cfg_.beta2) * g.square();
      p.value() -= cfg_.lr * (m_[i] / bc1) / ((v_[i] / bc2).sqrt() + cfg_.eps);
      p.zero_grad();
    }
  }

  int64_t step_count() const { return t_; }
  const std::vector<Tensor<S>>& params() const { return params_; }
  AdamConfig<S>& config() { return cfg_; }

  // moment accumulators, exposed for checkpointing
  std::vector<ArrayX<S>>& m() { return m_; }
  std::vector<ArrayX<S>>& v() { return v_; }
  const std::vector<ArrayX<S>>& m() const { return m_; }
  const std::vector<ArrayX<S>>& v() const { return v_; }
  void set_step_count(int64_t t) { t_ = t; }

 private:
  std::vector<Tensor<S>> params_;
  AdamConfig<S> cfg_;
  std::vector<ArrayX<S>> m_, v_;
  int64_t t_ = 0;
};

// Scales gradients so their global L2 norm does not exceed max_norm.
template <typename S>
S clip_global_norm(const std::vector<Tensor<S>>& params, S max_norm) {
  S sq = 0;
  for (const auto& p : params)
    if (p.has_grad()) sq += p.node()->grad.square().sum();
  S norm = std::sqrt(sq);
  if (norm > max_norm && norm > S(0)) {
    S scale = max_norm / norm;
    for (const auto& p : params)
      if (p.has_grad()) p.node()->grad *= scale;
  }
  return norm;
}

}  // namespace nca
