#pragma once

// Curriculum addition task: sequences of one-hot encoded integers, summed.
// Inputs are 11-dim (digit slots 0..9 plus a delimiter field); the sequence
// ends with a delimiter-only vector and the sum is read at that step.

#include <array>

#include "nca/rng.hpp"
#include "nca/tensor.hpp"

namespace nca {

constexpr int kAdditionInputDims = 11;

struct CurriculumStep {
  int max_digit;
  int max_length;
};

// six steps; the last one repeats until training concludes
constexpr std::array<CurriculumStep, 6> kAdditionCurriculum{
    {{2, 12}, {5, 12}, {9, 12}, {9, 25}, {9, 50}, {9, 100}}};

struct AdditionSample {
  std::vector<Eigen::ArrayXf> inputs;  // digits then one delimiter vector
  float target = 0;
};

// step is 1-based (1..6); digits uniform in [0, max_digit], length uniform in
// [1, max_length]
AdditionSample addition_generate(int step, Rng& rng);

// RMSE of a predictor over n fresh sequences of the given curriculum step
template <typename Predictor>
double addition_bench(Predictor&& predict, int n, int step, Rng& rng) {
  require(n >= 1, "addition_bench: need at least one test sequence");
  double se = 0;
  for (int i = 0; i < n; ++i) {
    auto sample = addition_generate(step, rng);
    const double err = (double)predict(sample) - (double)sample.target;
    se += err * err;
  }
  return std::sqrt(se / n);
}

}  // namespace nca
