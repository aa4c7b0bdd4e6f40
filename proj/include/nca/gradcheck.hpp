#pragma once

// Central finite-difference verification of reverse-mode gradients. The
// objective is re-evaluated with no tape active, so the numeric side never
// touches the differentiation machinery it is checking.

#include "nca/tensor.hpp"

namespace nca {

template <typename S, typename F>
S grad_check(F f, std::vector<Tensor<S>> xs, S h = S(1e-4)) {
  for (auto& x : xs) x.zero_grad();
  {
    Tape<S> tape;
    Tensor<S> loss = f();
    require(loss.size() == 1,
            "grad_check: objective must be scalar, got shape " + shape_str(loss.shape()));
    tape.backward(loss);
  }
  std::vector<ArrayX<S>> analytic;
  analytic.reserve(xs.size());
  for (auto& x : xs) analytic.push_back(x.grad());  // materializes zeros if untouched

  S max_err = 0;
  for (size_t p = 0; p < xs.size(); ++p) {
    auto& x = xs[p];
    for (long i = 0; i < x.size(); ++i) {
      const S orig = x.value()[i];
      x.value()[i] = orig + h;
      const S fp = f().item();
      x.value()[i] = orig - h;
      const S fm = f().item();
      x.value()[i] = orig;
      const S numeric = (fp - fm) / (S(2) * h);
      const S a = analytic[p][i];
      const S denom = std::max(S(1e-8), std::abs(a) + std::abs(numeric));
      max_err = std::max(max_err, std::abs(a - numeric) / denom);
    }
  }
  for (auto& x : xs) x.zero_grad();
  return max_err;
}

}  // namespace nca
