#pragma once

// Parameter initialization and the dense layer shared by every network here.
// Weights start uniform in [-s, s] with s = 1/sqrt(fan_in); biases start at 0.

#include "nca/rng.hpp"
#include "nca/tensor.hpp"

namespace nca {

template <typename S>
Tensor<S> uniform_param(Shape shape, int fan_in, Rng& rng) {
  const double s = 1.0 / std::sqrt((double)fan_in);
  ArrayX<S> a(numel(shape));
  for (long i = 0; i < a.size(); ++i) a[i] = (S)rng.uniform(-s, s);
  auto t = Tensor<S>::from_array(std::move(shape), std::move(a));
  return t.set_param();
}

template <typename S>
Tensor<S> zero_param(Shape shape) {
  auto t = Tensor<S>::zeros(std::move(shape));
  return t.set_param();
}

template <typename S>
struct Dense {
  Tensor<S> w, b;

  Dense() = default;
  Dense(int out, int in, Rng& rng) : w(uniform_param<S>({out, in}, in, rng)), b(zero_param<S>({out})) {}

  Tensor<S> operator()(const Tensor<S>& x) const { return matmul(w, x) + b; }

  void collect(std::vector<Tensor<S>>& ps) const {
    ps.push_back(w);
    ps.push_back(b);
  }
};

}  // namespace nca
