#include "nca/envs/addition.hpp"

namespace nca {

AdditionSample addition_generate(int step, Rng& rng) {
  require(step >= 1 && step <= (int)kAdditionCurriculum.size(),
          "addition: curriculum step out of range");
  const auto& cs = kAdditionCurriculum[step - 1];
  const int len = 1 + rng.randint(cs.max_length);
  AdditionSample s;
  s.inputs.reserve(len + 1);
  for (int i = 0; i < len; ++i) {
    const int digit = rng.randint(cs.max_digit + 1);
    Eigen::ArrayXf v = Eigen::ArrayXf::Zero(kAdditionInputDims);
    v[digit] = 1;
    s.inputs.push_back(v);
    s.target += (float)digit;
  }
  Eigen::ArrayXf delim = Eigen::ArrayXf::Zero(kAdditionInputDims);
  delim[kAdditionInputDims - 1] = 1;
  s.inputs.push_back(delim);
  return s;
}

}  // namespace nca
