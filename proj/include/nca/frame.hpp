#pragma once

// Observation frames: grayscale 64x64 intensities in [0,1], row-major.

#include <Eigen/Dense>

#include "nca/tensor.hpp"

namespace nca {

using Frame = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr int kFrameSize = 64;

template <typename S>
Tensor<S> frame_to_tensor(const Frame& f) {
  ArrayX<S> a(f.size());
  const float* p = f.data();
  for (long i = 0; i < f.size(); ++i) a[i] = (S)p[i];
  return Tensor<S>::from_array({1, (int)f.rows(), (int)f.cols()}, std::move(a));
}

template <typename S>
Frame tensor_to_frame(const Tensor<S>& t) {
  require(t.rank() == 3 && t.dim(0) == 1, "tensor_to_frame: expected {1,H,W}, got " +
                                              shape_str(t.shape()));
  Frame f(t.dim(1), t.dim(2));
  for (long i = 0; i < t.size(); ++i) f.data()[i] = (float)t.value()[i];
  return f;
}

// Grayscale conversion happens at load time; this step resizes (bilinear) to
// the model resolution and normalizes 8-bit ranges to [0,1]. Feeding its own
// output back through is a no-op.
inline Frame preprocess_frame(const Frame& img, int size = kFrameSize) {
  Frame src = img;
  if (src.maxCoeff() > 1.0001f) src /= 255.0f;
  if (src.rows() == size && src.cols() == size) return src.min(1.0f).max(0.0f);
  Frame out(size, size);
  const float sy = (float)src.rows() / size, sx = (float)src.cols() / size;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      float fy = (y + 0.5f) * sy - 0.5f, fx = (x + 0.5f) * sx - 0.5f;
      int y0 = std::clamp((int)std::floor(fy), 0, (int)src.rows() - 1);
      int x0 = std::clamp((int)std::floor(fx), 0, (int)src.cols() - 1);
      int y1 = std::min(y0 + 1, (int)src.rows() - 1);
      int x1 = std::min(x0 + 1, (int)src.cols() - 1);
      float wy = std::clamp(fy - y0, 0.0f, 1.0f), wx = std::clamp(fx - x0, 0.0f, 1.0f);
      out(y, x) = (1 - wy) * ((1 - wx) * src(y0, x0) + wx * src(y0, x1)) +
                  wy * ((1 - wx) * src(y1, x0) + wx * src(y1, x1));
    }
  return out.min(1.0f).max(0.0f);
}

}  // namespace nca
