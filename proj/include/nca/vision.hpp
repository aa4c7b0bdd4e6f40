#pragma once

// Convolutional autoencoder: frames -> 32-dim latent -> per-pixel Bernoulli
// means. Encoder/decoder spatial shapes are verified to be mutually inverse
// when the network is built.

#include "nca/frame.hpp"
#include "nca/nn.hpp"
#include "nca/tensor.hpp"

namespace nca {

struct ConvSpec {
  int filters, kernel, stride;
};

struct CaeConfig {
  int input_size = 64;  // square frames
  std::vector<ConvSpec> convs{{32, 8, 4}, {64, 4, 2}, {64, 3, 1}};
  int dense_units = 512;
  int latent_dims = 32;
};

template <typename S>
struct Autoencoder {
  CaeConfig cfg;
  struct Stage {
    int c, h, w;
  };
  std::vector<Stage> stages;  // stages[0] = input, stages[i] after conv i

  std::vector<Tensor<S>> enc_w, enc_b;
  Dense<S> enc_fc1, enc_fc2;
  Dense<S> dec_fc1, dec_fc2;
  std::vector<Tensor<S>> dec_w, dec_b;  // dec_w[i] maps stages[i+1] back to stages[i]

  Autoencoder() = default;

  Autoencoder(CaeConfig c, Rng& rng) : cfg(c) {
    stages.push_back({1, cfg.input_size, cfg.input_size});
    for (const auto& cs : cfg.convs) {
      const auto& prev = stages.back();
      require(prev.h >= cs.kernel && prev.w >= cs.kernel,
              "autoencoder: conv kernel exceeds input at stage " +
                  std::to_string(stages.size() - 1));
      stages.push_back({cs.filters, conv_out(prev.h, cs.kernel, cs.stride),
                        conv_out(prev.w, cs.kernel, cs.stride)});
      enc_w.push_back(uniform_param<S>({cs.filters, prev.c, cs.kernel, cs.kernel},
                                       prev.c * cs.kernel * cs.kernel, rng));
      enc_b.push_back(zero_param<S>({cs.filters}));
    }
    // mirror check: every decoder stage must be a valid conv preimage
    for (size_t i = 0; i < cfg.convs.size(); ++i) {
      const auto& cs = cfg.convs[i];
      require(conv_out(stages[i].h, cs.kernel, cs.stride) == stages[i + 1].h &&
                  conv_out(stages[i].w, cs.kernel, cs.stride) == stages[i + 1].w,
              "autoencoder: decoder stage " + std::to_string(i) +
                  " cannot restore the encoder's spatial shape");
      dec_w.push_back(uniform_param<S>(
          {stages[i + 1].c, stages[i].c, cs.kernel, cs.kernel},
          stages[i + 1].c * cs.kernel * cs.kernel, rng));
      dec_b.push_back(zero_param<S>({stages[i].c}));
    }
    const int flat = stages.back().c * stages.back().h * stages.back().w;
    enc_fc1 = Dense<S>(cfg.dense_units, flat, rng);
    enc_fc2 = Dense<S>(cfg.latent_dims, cfg.dense_units, rng);
    dec_fc1 = Dense<S>(cfg.dense_units, cfg.latent_dims, rng);
    dec_fc2 = Dense<S>(flat, cfg.dense_units, rng);
  }

  Tensor<S> encode(const Tensor<S>& frame) const {
    require(frame.rank() == 3 && frame.dim(0) == 1 && frame.dim(1) == cfg.input_size &&
                frame.dim(2) == cfg.input_size,
            "encode: expected {1," + std::to_string(cfg.input_size) + "," +
                std::to_string(cfg.input_size) + "}, got " + shape_str(frame.shape()));
    Tensor<S> x = frame;
    for (size_t i = 0; i < enc_w.size(); ++i)
      x = relu(conv2d(x, enc_w[i], enc_b[i], cfg.convs[i].stride));
    x = reshape(x, {(int)x.size()});
    return enc_fc2(relu(enc_fc1(x)));
  }

  Tensor<S> decode(const Tensor<S>& z) const {
    require(z.rank() == 1 && z.dim(0) == cfg.latent_dims,
            "decode: expected {" + std::to_string(cfg.latent_dims) + "}, got " +
                shape_str(z.shape()));
    auto x = relu(dec_fc2(relu(dec_fc1(z))));
    x = reshape(x, {stages.back().c, stages.back().h, stages.back().w});
    for (int i = (int)dec_w.size() - 1; i >= 0; --i) {
      x = conv2d_transpose(x, dec_w[i], dec_b[i], cfg.convs[i].stride, stages[i].h, stages[i].w);
      x = i > 0 ? relu(x) : sigmoid(x);
    }
    return x;
  }

  std::vector<Tensor<S>> parameters() const {
    std::vector<Tensor<S>> ps;
    for (size_t i = 0; i < enc_w.size(); ++i) {
      ps.push_back(enc_w[i]);
      ps.push_back(enc_b[i]);
    }
    enc_fc1.collect(ps);
    enc_fc2.collect(ps);
    dec_fc1.collect(ps);
    dec_fc2.collect(ps);
    for (size_t i = 0; i < dec_w.size(); ++i) {
      ps.push_back(dec_w[i]);
      ps.push_back(dec_b[i]);
    }
    return ps;
  }
};

}  // namespace nca
