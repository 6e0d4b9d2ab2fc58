#pragma once

// Cross-modal feature enhancement: one direction of the dual cross-attention
// block. Queries come from the auxiliary modality, keys and values from the
// target modality; the result is mixed back into the target through two
// coefficient-weighted residual paths.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dmff/ops.hpp"
#include "dmff/rng.hpp"
#include "dmff/token_codec.hpp"

namespace dmff {

template <class T>
struct CfeParams {
  Tensor<T> w_q, w_k, w_v, w_o;  // C x C, no bias
  Tensor<T> ffn_w1;              // C x h
  Tensor<T> ffn_b1;              // h
  Tensor<T> ffn_w2;              // h x C
  Tensor<T> ffn_b2;              // C
  Tensor<T> alpha, beta, gamma, delta;
  std::size_t heads = 8;

  std::size_t channels() const { return w_q.dim(0); }
  std::size_t hidden() const { return ffn_w1.dim(1); }

  /// Weights uniform in [-1/sqrt(C), 1/sqrt(C)], biases zero, coefficients 1.
  static CfeParams init(std::size_t channels, std::size_t hidden, std::size_t heads, Rng& rng) {
    if (heads == 0 || channels % heads != 0) {
      throw ConfigError("cfe: channels " + std::to_string(channels) + " not divisible by heads " +
                        std::to_string(heads));
    }
    if (hidden == 0) throw ConfigError("cfe: ffn hidden width must be >= 1");
    const double bound = 1.0 / std::sqrt(static_cast<double>(channels));
    auto uniform = [&](Shape s) {
      Tensor<T> t(std::move(s));
      for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
      return t;
    };
    CfeParams p;
    p.w_q = uniform({channels, channels});
    p.w_k = uniform({channels, channels});
    p.w_v = uniform({channels, channels});
    p.w_o = uniform({channels, channels});
    p.ffn_w1 = uniform({channels, hidden});
    p.ffn_b1 = Tensor<T>({hidden});
    p.ffn_w2 = uniform({hidden, channels});
    p.ffn_b2 = Tensor<T>({channels});
    p.alpha = p.beta = p.gamma = p.delta = Tensor<T>::scalar(T(1));
    p.heads = heads;
    return p;
  }

  void set_coefficients(T a, T b, T g, T d) {
    alpha[0] = a;
    beta[0] = b;
    gamma[0] = g;
    delta[0] = d;
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    visit_impl(*this, prefix, f);
  }
  template <class F>
  void visit(const std::string& prefix, F&& f) const {
    visit_impl(*this, prefix, f);
  }

 private:
  template <class Self, class F>
  static void visit_impl(Self& s, const std::string& prefix, F& f) {
    f(prefix + "w_q", s.w_q);
    f(prefix + "w_k", s.w_k);
    f(prefix + "w_v", s.w_v);
    f(prefix + "w_o", s.w_o);
    f(prefix + "ffn_w1", s.ffn_w1);
    f(prefix + "ffn_b1", s.ffn_b1);
    f(prefix + "ffn_w2", s.ffn_w2);
    f(prefix + "ffn_b2", s.ffn_b2);
    f(prefix + "alpha", s.alpha);
    f(prefix + "beta", s.beta);
    f(prefix + "gamma", s.gamma);
    f(prefix + "delta", s.delta);
  }
};

/// CfeParams registered on a tape.
template <class T>
struct CfeVars {
  Var<T> w_q, w_k, w_v, w_o, ffn_w1, ffn_b1, ffn_w2, ffn_b2, alpha, beta, gamma, delta;
  std::size_t heads = 1;
};

template <class T>
CfeVars<T> bind_cfe(Tape<T>& tape, const CfeParams<T>& p, const std::string& prefix) {
  CfeVars<T> v;
  v.w_q = tape.parameter(prefix + "w_q", p.w_q);
  v.w_k = tape.parameter(prefix + "w_k", p.w_k);
  v.w_v = tape.parameter(prefix + "w_v", p.w_v);
  v.w_o = tape.parameter(prefix + "w_o", p.w_o);
  v.ffn_w1 = tape.parameter(prefix + "ffn_w1", p.ffn_w1);
  v.ffn_b1 = tape.parameter(prefix + "ffn_b1", p.ffn_b1);
  v.ffn_w2 = tape.parameter(prefix + "ffn_w2", p.ffn_w2);
  v.ffn_b2 = tape.parameter(prefix + "ffn_b2", p.ffn_b2);
  v.alpha = tape.parameter(prefix + "alpha", p.alpha);
  v.beta = tape.parameter(prefix + "beta", p.beta);
  v.gamma = tape.parameter(prefix + "gamma", p.gamma);
  v.delta = tape.parameter(prefix + "delta", p.delta);
  v.heads = p.heads;
  return v;
}

/// Multi-head attention of `q_tokens` over `kv_tokens`, before the output
/// projection. Heads are contiguous column blocks of width C / heads and each
/// head's scores are scaled by 1/sqrt(C / heads). When `probs` is non-null it
/// receives every head's row-normalized score matrix.
template <class T>
Var<T> cross_attention(const TokenSeq<T>& q_tokens, const TokenSeq<T>& kv_tokens, const CfeVars<T>& p,
                       std::vector<Tensor<T>>* probs = nullptr) {
  const std::size_t c = q_tokens.channels();
  if (kv_tokens.channels() != c) {
    throw DimensionError("cross_attention: query channels " + std::to_string(c) + " vs key/value channels " +
                         std::to_string(kv_tokens.channels()));
  }
  if (p.heads == 0 || c % p.heads != 0) {
    throw ConfigError("cross_attention: channels " + std::to_string(c) + " not divisible by heads " +
                      std::to_string(p.heads));
  }
  const std::size_t dk = c / p.heads;
  Var<T> q, k, v;
  {
    ScopedCostTag tag(CostTag::kProjection);
    q = ops::matmul(q_tokens.tokens, p.w_q);
    k = ops::matmul(kv_tokens.tokens, p.w_k);
    v = ops::matmul(kv_tokens.tokens, p.w_v);
  }
  const T inv_scale = T(1) / std::sqrt(static_cast<T>(dk));
  std::vector<Var<T>> heads;
  heads.reserve(p.heads);
  for (std::size_t j = 0; j < p.heads; ++j) {
    Var<T> qj = ops::slice_cols(q, j * dk, dk);
    Var<T> kj = ops::slice_cols(k, j * dk, dk);
    Var<T> vj = ops::slice_cols(v, j * dk, dk);
    Var<T> scores;
    {
      ScopedCostTag tag(CostTag::kScores);
      scores = ops::matmul(qj, ops::transpose(kj));
    }
    Var<T> attn = ops::softmax_rows(ops::affine(scores, inv_scale, T(0)));
    if (probs) probs->push_back(attn.value());
    ScopedCostTag tag(CostTag::kWeightedSum);
    heads.push_back(ops::matmul(attn, vj));
  }
  return p.heads == 1 ? heads.front() : ops::concat_cols(heads);
}

/// Two-layer rectifier feed-forward network with biases.
template <class T>
Var<T> feed_forward(Var<T> x, const CfeVars<T>& p) {
  ScopedCostTag tag(CostTag::kFfn);
  Var<T> hidden = ops::relu(ops::add_row_bias(ops::matmul(x, p.ffn_w1), p.ffn_b1));
  return ops::add_row_bias(ops::matmul(hidden, p.ffn_w2), p.ffn_b2);
}

/// Enhances `target` with information from `aux`:
///   Z  = cross_attention(aux -> target)
///   T' = alpha * Z W_o + beta * target
///   out = gamma * T' + delta * FFN(T')
template <class T>
TokenSeq<T> cfe_forward(const TokenSeq<T>& target, const TokenSeq<T>& aux, const CfeVars<T>& p,
                        std::vector<Tensor<T>>* probs = nullptr) {
  Var<T> z = cross_attention(aux, target, p, probs);
  if (z.dim(0) != target.count()) {
    throw DimensionError("cfe_forward: auxiliary sequence has " + std::to_string(aux.count()) +
                         " tokens but target has " + std::to_string(target.count()));
  }
  Var<T> projected;
  {
    ScopedCostTag tag(CostTag::kProjection);
    projected = ops::matmul(z, p.w_o);
  }
  Var<T> mid = ops::add(ops::scale_by(projected, p.alpha), ops::scale_by(target.tokens, p.beta));
  Var<T> out = ops::add(ops::scale_by(mid, p.gamma), ops::scale_by(feed_forward(mid, p), p.delta));
  return {out, target.origin_h, target.origin_w};
}

}  // namespace dmff
