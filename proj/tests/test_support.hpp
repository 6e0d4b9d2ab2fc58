#pragma once

// Shared helpers for the unit suites: seeded random tensors and brute-force
// reference implementations that never touch the library kernels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "dmff/all.hpp"

namespace dmff::testing {

inline Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline Tensor<double> naive_matmul(const Tensor<double>& a, const Tensor<double>& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<double> c({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += a(i, p) * b(p, j);
      c(i, j) = acc;
    }
  return c;
}

inline Tensor<double> naive_softmax_rows(const Tensor<double>& m) {
  Tensor<double> y(m.shape());
  for (std::size_t i = 0; i < m.dim(0); ++i) {
    long double z = 0;
    for (std::size_t j = 0; j < m.dim(1); ++j) z += std::exp(static_cast<long double>(m(i, j)));
    for (std::size_t j = 0; j < m.dim(1); ++j) y(i, j) = static_cast<double>(std::exp(static_cast<long double>(m(i, j))) / z);
  }
  return y;
}

/// Multi-head attention written as one flat loop nest per head, with the full
/// score matrix materialized. q, kv are token matrices.
inline Tensor<double> naive_attention(const Tensor<double>& q, const Tensor<double>& kv, const CfeParams<double>& p) {
  const std::size_t tq = q.dim(0), tk = kv.dim(0), c = q.dim(1), dk = c / p.heads;
  Tensor<double> out({tq, c});
  for (std::size_t h = 0; h < p.heads; ++h) {
    std::vector<double> qh(tq * dk), kh(tk * dk), vh(tk * dk);
    for (std::size_t i = 0; i < tq; ++i)
      for (std::size_t d = 0; d < dk; ++d)
        for (std::size_t x = 0; x < c; ++x) qh[i * dk + d] += q(i, x) * p.w_q(x, h * dk + d);
    for (std::size_t i = 0; i < tk; ++i)
      for (std::size_t d = 0; d < dk; ++d)
        for (std::size_t x = 0; x < c; ++x) {
          kh[i * dk + d] += kv(i, x) * p.w_k(x, h * dk + d);
          vh[i * dk + d] += kv(i, x) * p.w_v(x, h * dk + d);
        }
    for (std::size_t i = 0; i < tq; ++i) {
      std::vector<double> s(tk);
      double mx = -1e300;
      for (std::size_t j = 0; j < tk; ++j) {
        for (std::size_t d = 0; d < dk; ++d) s[j] += qh[i * dk + d] * kh[j * dk + d];
        s[j] /= std::sqrt(static_cast<double>(dk));
        mx = std::max(mx, s[j]);
      }
      double z = 0;
      for (auto& v : s) z += (v = std::exp(v - mx));
      for (std::size_t j = 0; j < tk; ++j)
        for (std::size_t d = 0; d < dk; ++d) out(i, h * dk + d) += s[j] / z * vh[j * dk + d];
    }
  }
  return out;
}

inline Tensor<double> naive_ffn(const Tensor<double>& x, const CfeParams<double>& p) {
  const std::size_t t = x.dim(0), c = x.dim(1), h = p.hidden();
  Tensor<double> y({t, c});
  for (std::size_t i = 0; i < t; ++i) {
    std::vector<double> hid(h);
    for (std::size_t k = 0; k < h; ++k) {
      double a = p.ffn_b1[k];
      for (std::size_t x_ = 0; x_ < c; ++x_) a += x(i, x_) * p.ffn_w1(x_, k);
      hid[k] = a > 0 ? a : 0;
    }
    for (std::size_t o = 0; o < c; ++o) {
      double a = p.ffn_b2[o];
      for (std::size_t k = 0; k < h; ++k) a += hid[k] * p.ffn_w2(k, o);
      y(i, o) = a;
    }
  }
  return y;
}

/// Reference CFE built from the naive pieces.
inline Tensor<double> naive_cfe(const Tensor<double>& target, const Tensor<double>& aux, const CfeParams<double>& p) {
  const Tensor<double> z = naive_matmul(naive_attention(aux, target, p), p.w_o);
  Tensor<double> mid(target.shape());
  for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = p.alpha[0] * z[i] + p.beta[0] * target[i];
  const Tensor<double> f = naive_ffn(mid, p);
  Tensor<double> out(target.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = p.gamma[0] * mid[i] + p.delta[0] * f[i];
  return out;
}

/// Sampling formula for one output coordinate, align-corners-false with clamp.
inline double naive_bilinear_at(const Tensor<double>& m, std::size_t oi, std::size_t oj, std::size_t ch,
                                std::size_t h_out, std::size_t w_out) {
  const std::size_t h = m.dim(0), w = m.dim(1);
  auto src = [](std::size_t o, std::size_t in, std::size_t out) {
    double x = (static_cast<double>(o) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
    return std::clamp(x, 0.0, static_cast<double>(in - 1));
  };
  const double y = src(oi, h, h_out), x = src(oj, w, w_out);
  const std::size_t y0 = static_cast<std::size_t>(std::floor(y)), x0 = static_cast<std::size_t>(std::floor(x));
  const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
  return (1 - fy) * (1 - fx) * m(y0, x0, ch) + (1 - fy) * fx * m(y0, x1, ch) + fy * (1 - fx) * m(y1, x0, ch) +
         fy * fx * m(y1, x1, ch);
}

/// Per-pixel 1x1 convolution over [a, b] channel concatenation.
inline Tensor<double> naive_nin(const Tensor<double>& a, const Tensor<double>& b, const Tensor<double>& w,
                                const Tensor<double>& bias) {
  const std::size_t h = a.dim(0), wd = a.dim(1), c = a.dim(2);
  Tensor<double> out({h, wd, c});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < wd; ++j)
      for (std::size_t o = 0; o < c; ++o) {
        double acc = bias[o];
        for (std::size_t k = 0; k < c; ++k) acc += a(i, j, k) * w(k, o) + b(i, j, k) * w(c + k, o);
        out(i, j, o) = acc;
      }
  return out;
}

/// Central differences of a scalar function of one tensor, in extended precision.
template <class F>
Tensor<double> numeric_gradient(const Tensor<double>& x, F&& f, double eps = 1e-5) {
  Tensor<double> g(x.shape());
  Tensor<long double> probe = x.cast<long double>();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double saved = probe[i];
    probe[i] = saved + eps;
    const long double lp = f(probe);
    probe[i] = saved - eps;
    const long double lm = f(probe);
    probe[i] = saved;
    g[i] = static_cast<double>((lp - lm) / (2 * static_cast<long double>(eps)));
  }
  return g;
}

inline double max_relative_error(const Tensor<double>& a, const Tensor<double>& n, double floor = 1e-12) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, relative_error(a[i], n[i], floor));
  return m;
}

/// Gradient check of a differentiable map `op(tape, x)` under a squared-error
/// loss against a fixed random target. Returns the worst relative error.
template <class Op>
double op_gradient_error(const Tensor<double>& x, Op&& op, std::uint64_t seed = 99) {
  Tensor<double> target;
  {
    Tape<double> tape;
    Var<double> y = op(tape, tape.parameter("x", x));
    Rng rng(seed);
    target = random_tensor(y.shape(), rng);
  }
  Tape<double> tape;
  Var<double> y = op(tape, tape.parameter("x", x));
  const Tensor<double> analytic = tape.backward(ops::mean_squared_error(y, target)).at("x");
  const Tensor<long double> wide_target = target.cast<long double>();
  const Tensor<double> numeric = numeric_gradient(x, [&](const Tensor<long double>& probe) {
    Tape<long double> t;
    return ops::mean_squared_error(op(t, t.parameter("x", probe)), wide_target).value()[0];
  });
  return max_relative_error(analytic, numeric);
}


}  // namespace dmff::testing
