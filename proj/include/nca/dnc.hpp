#pragma once

// Differentiable Neural Computer cell: LSTM controller + external memory with
// content, allocation and temporal-link addressing. A plain LSTM with the
// same call shape is provided as the comparison baseline.

#include <algorithm>
#include <numeric>

#include "nca/nn.hpp"
#include "nca/tensor.hpp"

namespace nca {

struct DncConfig {
  int memory_locations = 256;  // N
  int word_width = 64;         // W
  int read_heads = 4;          // R
  int controller_units = 256;  // H
  int input_size = 0;
  int output_size = 0;

  // R read keys, R read strengths, write key, write strength, erase vector,
  // write vector, R free gates, allocation gate, write gate, 3R read modes
  int interface_size() const {
    return word_width * read_heads + 3 * word_width + 5 * read_heads + 3;
  }
  int controller_input() const { return input_size + read_heads * word_width; }

  void validate() const {
    require(memory_locations >= 1 && word_width >= 1 && read_heads >= 1 &&
                controller_units >= 1 && input_size >= 1 && output_size >= 1,
            "DncConfig: all dimensions must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// LSTM cell (gate order i, f, g, o; forget bias starts at 1)

template <typename S>
struct LstmState {
  Tensor<S> h, c;
};

template <typename S>
struct LstmCell {
  int units = 0;
  Tensor<S> wx, wh, b;

  LstmCell() = default;
  LstmCell(int units_, int in, Rng& rng)
      : units(units_),
        wx(uniform_param<S>({4 * units_, in}, in, rng)),
        wh(uniform_param<S>({4 * units_, units_}, units_, rng)),
        b(zero_param<S>({4 * units_})) {
    for (int i = units; i < 2 * units; ++i) b.value()[i] = S(1);
  }

  LstmState<S> initial_state() const {
    return {Tensor<S>::zeros({units}), Tensor<S>::zeros({units})};
  }

  LstmState<S> operator()(const LstmState<S>& s, const Tensor<S>& x) const {
    require(x.rank() == 1 && x.dim(0) == wx.dim(1),
            "lstm: input width " + shape_str(x.shape()) + " does not match " +
                shape_str(wx.shape()));
    auto gates = matmul(wx, x) + matmul(wh, s.h) + b;
    auto i = sigmoid(slice(gates, 0, units));
    auto f = sigmoid(slice(gates, units, units));
    auto g = tanh(slice(gates, 2 * units, units));
    auto o = sigmoid(slice(gates, 3 * units, units));
    auto c = f * s.c + i * g;
    auto h = o * tanh(c);
    return {h, c};
  }

  void collect(std::vector<Tensor<S>>& ps) const {
    ps.push_back(wx);
    ps.push_back(wh);
    ps.push_back(b);
  }
};

// LSTM baseline with an affine output head; drop-in comparison for the DNC.
template <typename S>
struct LstmModel {
  LstmCell<S> cell;
  Dense<S> head;

  LstmModel() = default;
  LstmModel(int units, int in, int out, Rng& rng) : cell(units, in, rng), head(out, units, rng) {}

  LstmState<S> initial_state() const { return cell.initial_state(); }

  std::pair<Tensor<S>, LstmState<S>> operator()(const LstmState<S>& s, const Tensor<S>& x) const {
    auto s2 = cell(s, x);
    return {head(s2.h), s2};
  }

  std::vector<Tensor<S>> parameters() const {
    std::vector<Tensor<S>> ps;
    cell.collect(ps);
    head.collect(ps);
    return ps;
  }
};

// ---------------------------------------------------------------------------
// memory addressing

// softmax over strength-scaled cosine similarity; beta must be >= 1 (oneplus)
template <typename S>
Tensor<S> content_weighting(const Tensor<S>& memory, const Tensor<S>& key,
                            const Tensor<S>& strength) {
  return softmax(strength * cosine_rows(memory, key));
}

// Allocation over free slots: with phi = indices of u sorted ascending,
//   a[phi[j]] = (1 - u[phi[j]]) * prod_{l<j} u[phi[l]]
// Ties are broken by lower index; the permutation is held fixed in backward.
template <typename S>
Tensor<S> allocation_weighting(const Tensor<S>& usage) {
  require(usage.rank() == 1, "allocation_weighting: usage must be rank-1, got " +
                                 shape_str(usage.shape()));
  const int n = usage.dim(0);
  std::vector<int> phi(n);
  std::iota(phi.begin(), phi.end(), 0);
  const auto& u = usage.value();
  std::stable_sort(phi.begin(), phi.end(), [&u](int a, int b) { return u[a] < u[b]; });

  auto out = make_result<S>(Shape{n});
  out.value().resize(n);
  ArrayX<S> prefix(n);  // prefix[j] = prod_{l<j} u[phi[l]]
  S run = S(1);
  for (int j = 0; j < n; ++j) {
    prefix[j] = run;
    out.value()[phi[j]] = (S(1) - u[phi[j]]) * run;
    run *= u[phi[j]];
  }
  record<S>([usage, out, phi, prefix, n] {
    if (!out.has_grad()) return;
    const auto& u = usage.value();
    const auto& g = out.node()->grad;
    auto& du = usage.node()->grad_ref();
    // suffix recurrence: S_m = g'_{m+1} (1-u'_{m+1}) + u'_{m+1} S_{m+1}
    S suffix = S(0);
    ArrayX<S> dus(n);
    for (int m = n - 1; m >= 0; --m) {
      const S um = u[phi[m]];
      const S gm = g[phi[m]];
      dus[m] = prefix[m] * (suffix - gm);
      suffix = gm * (S(1) - um) + um * suffix;
    }
    for (int m = 0; m < n; ++m) du[phi[m]] += dus[m];
  });
  return out;
}

// L[i,j] <- (1 - ww[i] - ww[j]) L_prev[i,j] + ww[i] p_prev[j], zero diagonal
template <typename S>
Tensor<S> temporal_link_update(const Tensor<S>& link, const Tensor<S>& ww, const Tensor<S>& p) {
  const int n = ww.dim(0);
  require(link.rank() == 2 && link.dim(0) == n && link.dim(1) == n && p.dim(0) == n,
          "temporal_link_update: inconsistent shapes " + shape_str(link.shape()) + ", " +
              shape_str(ww.shape()) + ", " + shape_str(p.shape()));
  auto out = make_result<S>(Shape{n, n});
  out.value().resize((long)n * n);
  {
    ConstMatMap<S> L(link.value().data(), n, n);
    MatMap<S> O(out.value().data(), n, n);
    const auto& w = ww.value();
    const auto& pp = p.value();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        O(i, j) = i == j ? S(0) : (S(1) - w[i] - w[j]) * L(i, j) + w[i] * pp[j];
  }
  record<S>([link, ww, p, out, n] {
    if (!out.has_grad()) return;
    ConstMatMap<S> L(link.value().data(), n, n);
    ConstMatMap<S> G(out.node()->grad.data(), n, n);
    const auto& w = ww.value();
    const auto& pp = p.value();
    MatMap<S> DL(link.node()->grad_ref().data(), n, n);
    auto& dw = ww.node()->grad_ref();
    auto& dp = p.node()->grad_ref();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const S g = G(i, j);
        DL(i, j) += g * (S(1) - w[i] - w[j]);
        dw[i] += g * (pp[j] - L(i, j));
        dw[j] += -g * L(i, j);
        dp[j] += g * w[i];
      }
  });
  return out;
}

// ---------------------------------------------------------------------------
// full recurrent state

template <typename S>
struct DncState {
  Tensor<S> h, c;              // controller
  Tensor<S> memory;            // {N,W}
  Tensor<S> usage;             // {N}
  Tensor<S> precedence;        // {N}
  Tensor<S> link;              // {N,N}
  Tensor<S> write_weighting;   // {N}
  std::vector<Tensor<S>> read_weightings;  // R x {N}
  std::vector<Tensor<S>> read_vectors;     // R x {W}

  DncState detach() const {
    DncState s;
    s.h = h.detach();
    s.c = c.detach();
    s.memory = memory.detach();
    s.usage = usage.detach();
    s.precedence = precedence.detach();
    s.link = link.detach();
    s.write_weighting = write_weighting.detach();
    for (const auto& w : read_weightings) s.read_weightings.push_back(w.detach());
    for (const auto& r : read_vectors) s.read_vectors.push_back(r.detach());
    return s;
  }

  // flat list in documented order, for checkpointing
  std::vector<Tensor<S>> tensors() const {
    std::vector<Tensor<S>> ts{h, c, memory, usage, precedence, link, write_weighting};
    for (const auto& w : read_weightings) ts.push_back(w);
    for (const auto& r : read_vectors) ts.push_back(r);
    return ts;
  }
};

// throws naming the violated bound; wired into debug builds and property tests
template <typename S>
void check_state_invariants(const DncState<S>& st, S tol = S(1e-6)) {
  auto in01 = [&](const ArrayX<S>& a, const char* name) {
    if ((a < S(0) - tol).any() || (a > S(1) + tol).any())
      fail(std::string(name) + " outside [0,1]");
  };
  in01(st.usage.value(), "usage");
  auto weighting = [&](const Tensor<S>& w, const char* name) {
    if ((w.value() < -tol).any()) fail(std::string(name) + " has negative entries");
    if (w.value().sum() > S(1) + tol) fail(std::string(name) + " sums above 1");
  };
  weighting(st.write_weighting, "write weighting");
  for (const auto& w : st.read_weightings) weighting(w, "read weighting");
  weighting(st.precedence, "precedence");
  const int n = st.link.dim(0);
  ConstMatMap<S> L(st.link.value().data(), n, n);
  for (int i = 0; i < n; ++i) {
    if (L(i, i) != S(0)) fail("link diagonal not exactly 0");
    if (L.row(i).sum() > S(1) + tol) fail("link row sum above 1");
    if (L.col(i).sum() > S(1) + tol) fail("link column sum above 1");
  }
  if ((st.link.value() < -tol).any() || (st.link.value() > S(1) + tol).any())
    fail("link entries outside [0,1]");
}

// ---------------------------------------------------------------------------
// interface vector, parsed by fixed slicing in the order documented below

template <typename S>
struct DncInterface {
  std::vector<Tensor<S>> read_keys;       // R x {W}
  std::vector<Tensor<S>> read_strengths;  // R x {1}, oneplus
  Tensor<S> write_key;                    // {W}
  Tensor<S> write_strength;               // {1}, oneplus
  Tensor<S> erase;                        // {W}, sigmoid
  Tensor<S> write_vector;                 // {W}
  std::vector<Tensor<S>> free_gates;      // R x {1}, sigmoid
  Tensor<S> alloc_gate;                   // {1}, sigmoid
  Tensor<S> write_gate;                   // {1}, sigmoid
  std::vector<Tensor<S>> read_modes;      // R x {3}, softmax (backward, content, forward)
};

template <typename S>
Tensor<S> oneplus(const Tensor<S>& x) {
  return S(1) + softplus(x);
}

template <typename S>
DncInterface<S> parse_interface(const Tensor<S>& xi, const DncConfig& cfg) {
  const int W = cfg.word_width, R = cfg.read_heads;
  require(xi.size() == cfg.interface_size(), "interface vector width " + shape_str(xi.shape()) +
                                                 " != expected {" +
                                                 std::to_string(cfg.interface_size()) + "}");
  DncInterface<S> f;
  long at = 0;
  auto take = [&](int len) {
    auto t = slice(xi, at, len);
    at += len;
    return t;
  };
  for (int i = 0; i < R; ++i) f.read_keys.push_back(take(W));
  for (int i = 0; i < R; ++i) f.read_strengths.push_back(oneplus(take(1)));
  f.write_key = take(W);
  f.write_strength = oneplus(take(1));
  f.erase = sigmoid(take(W));
  f.write_vector = take(W);
  for (int i = 0; i < R; ++i) f.free_gates.push_back(sigmoid(take(1)));
  f.alloc_gate = sigmoid(take(1));
  f.write_gate = sigmoid(take(1));
  for (int i = 0; i < R; ++i) f.read_modes.push_back(softmax(take(3)));
  return f;
}

// ---------------------------------------------------------------------------
// one write phase: retention, usage, allocation, gated write, precedence, link

template <typename S>
void dnc_write(DncState<S>& st, const DncInterface<S>& f) {
  // memory retained where free gates release previous reads
  Tensor<S> psi;
  for (size_t i = 0; i < st.read_weightings.size(); ++i) {
    auto term = S(1) - f.free_gates[i] * st.read_weightings[i];
    psi = i == 0 ? term : psi * term;
  }
  auto usage = (st.usage + st.write_weighting - st.usage * st.write_weighting) * psi;
  auto alloc = allocation_weighting(usage);
  auto content = content_weighting(st.memory, f.write_key, f.write_strength);
  auto ww = f.write_gate * (f.alloc_gate * alloc + (S(1) - f.alloc_gate) * content);

  auto memory = st.memory * (S(1) - outer(ww, f.erase)) + outer(ww, f.write_vector);
  auto link = temporal_link_update(st.link, ww, st.precedence);
  auto precedence = (S(1) - sum(ww)) * st.precedence + ww;

  st.usage = usage;
  st.write_weighting = ww;
  st.memory = memory;
  st.link = link;
  st.precedence = precedence;
}

// one read phase: temporal forward/backward plus content, mixed per head
template <typename S>
void dnc_read(DncState<S>& st, const DncInterface<S>& f) {
  for (size_t i = 0; i < st.read_weightings.size(); ++i) {
    auto fwd = matmul(st.link, st.read_weightings[i]);
    auto bwd = tmatvec(st.link, st.read_weightings[i]);
    auto content = content_weighting(st.memory, f.read_keys[i], f.read_strengths[i]);
    auto pi = f.read_modes[i];
    auto wr = slice(pi, 0, 1) * bwd + slice(pi, 1, 1) * content + slice(pi, 2, 1) * fwd;
    st.read_weightings[i] = wr;
    st.read_vectors[i] = tmatvec(st.memory, wr);
  }
}

// ---------------------------------------------------------------------------
// the cell

template <typename S>
struct DncCell {
  DncConfig cfg;
  LstmCell<S> controller;
  Dense<S> interface_proj;  // h -> interface vector
  Tensor<S> wy;             // {out, H}
  Tensor<S> wr;             // {out, R*W}
  Tensor<S> by;             // {out}

  DncCell() = default;
  DncCell(DncConfig c, Rng& rng) : cfg(c) {
    cfg.validate();
    controller = LstmCell<S>(cfg.controller_units, cfg.controller_input(), rng);
    interface_proj = Dense<S>(cfg.interface_size(), cfg.controller_units, rng);
    wy = uniform_param<S>({cfg.output_size, cfg.controller_units}, cfg.controller_units, rng);
    wr = uniform_param<S>({cfg.output_size, cfg.read_heads * cfg.word_width},
                          cfg.read_heads * cfg.word_width, rng);
    by = zero_param<S>({cfg.output_size});
  }

  DncState<S> initial_state() const {
    DncState<S> s;
    const int N = cfg.memory_locations, W = cfg.word_width, H = cfg.controller_units;
    s.h = Tensor<S>::zeros({H});
    s.c = Tensor<S>::zeros({H});
    s.memory = Tensor<S>::zeros({N, W});
    s.usage = Tensor<S>::zeros({N});
    s.precedence = Tensor<S>::zeros({N});
    s.link = Tensor<S>::zeros({N, N});
    s.write_weighting = Tensor<S>::zeros({N});
    for (int i = 0; i < cfg.read_heads; ++i) {
      s.read_weightings.push_back(Tensor<S>::zeros({N}));
      s.read_vectors.push_back(Tensor<S>::zeros({W}));
    }
    return s;
  }

  std::pair<Tensor<S>, DncState<S>> operator()(const DncState<S>& prev, const Tensor<S>& x) const {
    require(x.rank() == 1 && x.dim(0) == cfg.input_size,
            "dnc: input width " + shape_str(x.shape()) + " != {" +
                std::to_string(cfg.input_size) + "}");
    DncState<S> st = prev;
    std::vector<Tensor<S>> ctrl_in{x};
    for (const auto& r : prev.read_vectors) ctrl_in.push_back(r);
    auto ls = controller(LstmState<S>{prev.h, prev.c}, concat(ctrl_in));
    st.h = ls.h;
    st.c = ls.c;
    auto f = parse_interface(interface_proj(ls.h), cfg);
    dnc_write(st, f);
    dnc_read(st, f);
    std::vector<Tensor<S>> reads;
    for (const auto& r : st.read_vectors) reads.push_back(r);
    auto y = matmul(wy, st.h) + matmul(wr, concat(reads)) + by;
#ifndef NDEBUG
    check_state_invariants(st);
#endif
    return {y, st};
  }

  std::vector<Tensor<S>> parameters() const {
    std::vector<Tensor<S>> ps;
    controller.collect(ps);
    interface_proj.collect(ps);
    ps.push_back(wy);
    ps.push_back(wr);
    ps.push_back(by);
    return ps;
  }
};

}  // namespace nca
