#pragma once

// Forward kernels and their adjoints on plain tensors. The differentiable
// wrappers in ops.hpp compose these; nothing here touches a tape.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "dmff/errors.hpp"
#include "dmff/tensor.hpp"

namespace dmff::kernels {

enum class PoolKind { kAvg, kMax };

inline void require_rank(const Shape& s, std::size_t r, const char* what) {
  if (s.size() != r) {
    throw DimensionError(std::string(what) + ": expected rank " + std::to_string(r) + ", got " +
                         shape_str(s));
  }
}

// C = A * B
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a.shape(), 2, "matmul lhs");
  require_rank(b.shape(), 2, "matmul rhs");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  Tensor<T> c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a(i, p);
      for (std::size_t j = 0; j < n; ++j) c(i, j) += aip * b(p, j);
    }
  }
  return c;
}

template <class T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_rank(a.shape(), 2, "transpose");
  Tensor<T> t({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j) t(j, i) = a(i, j);
  return t;
}

// Row-wise softmax with max subtraction.
template <class T>
Tensor<T> softmax_rows(const Tensor<T>& m) {
  require_rank(m.shape(), 2, "softmax_rows");
  const std::size_t r = m.dim(0), c = m.dim(1);
  Tensor<T> out({r, c});
  for (std::size_t i = 0; i < r; ++i) {
    T mx = m(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, m(i, j));
    T sum = 0;
    for (std::size_t j = 0; j < c; ++j) {
      out(i, j) = std::exp(m(i, j) - mx);
      sum += out(i, j);
    }
    for (std::size_t j = 0; j < c; ++j) out(i, j) /= sum;
  }
  return out;
}

// dX = Y * (dY - rowsum(dY * Y))
template <class T>
Tensor<T> softmax_rows_adjoint(const Tensor<T>& y, const Tensor<T>& dy) {
  Tensor<T> dx(y.shape());
  const std::size_t r = y.dim(0), c = y.dim(1);
  for (std::size_t i = 0; i < r; ++i) {
    T dot = 0;
    for (std::size_t j = 0; j < c; ++j) dot += dy(i, j) * y(i, j);
    for (std::size_t j = 0; j < c; ++j) dx(i, j) = y(i, j) * (dy(i, j) - dot);
  }
  return dx;
}

inline void require_pool_divisible(const Shape& s, std::size_t window, const char* what) {
  require_rank(s, 3, what);
  if (window == 0) throw ConfigError(std::string(what) + ": window must be >= 1");
  if (s[0] % window != 0 || s[1] % window != 0) {
    throw ConfigError(std::string(what) + ": extents " + shape_str(s) + " not divisible by window " +
                      std::to_string(window));
  }
}

/// Non-overlapping s x s pooling on an H x W x C map. For max pooling
/// `argmax`, when non-null, receives the flat input index chosen for each
/// output element (first row-major maximum wins ties).
template <class T>
Tensor<T> pool2d(const Tensor<T>& map, std::size_t s, PoolKind kind,
                 std::vector<std::size_t>* argmax = nullptr) {
  require_pool_divisible(map.shape(), s, "pool2d");
  const std::size_t h = map.dim(0), w = map.dim(1), c = map.dim(2);
  const std::size_t ho = h / s, wo = w / s;
  Tensor<T> out({ho, wo, c});
  if (argmax) argmax->assign(out.size(), 0);
  const T inv = T(1) / static_cast<T>(s * s);
  for (std::size_t oi = 0; oi < ho; ++oi) {
    for (std::size_t oj = 0; oj < wo; ++oj) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        if (kind == PoolKind::kAvg) {
          T acc = 0;
          for (std::size_t di = 0; di < s; ++di)
            for (std::size_t dj = 0; dj < s; ++dj) acc += map(oi * s + di, oj * s + dj, ch);
          out(oi, oj, ch) = acc * inv;
        } else {
          std::size_t best = ((oi * s) * w + oj * s) * c + ch;
          for (std::size_t di = 0; di < s; ++di) {
            for (std::size_t dj = 0; dj < s; ++dj) {
              const std::size_t idx = ((oi * s + di) * w + (oj * s + dj)) * c + ch;
              if (map[idx] > map[best]) best = idx;
            }
          }
          out(oi, oj, ch) = map[best];
          if (argmax) (*argmax)[(oi * wo + oj) * c + ch] = best;
        }
      }
    }
  }
  return out;
}

template <class T>
Tensor<T> avg_pool2d_adjoint(const Shape& in_shape, std::size_t s, const Tensor<T>& dy) {
  Tensor<T> dx(in_shape);
  const std::size_t c = in_shape[2];
  const T inv = T(1) / static_cast<T>(s * s);
  for (std::size_t i = 0; i < in_shape[0]; ++i)
    for (std::size_t j = 0; j < in_shape[1]; ++j)
      for (std::size_t ch = 0; ch < c; ++ch) dx(i, j, ch) = dy(i / s, j / s, ch) * inv;
  return dx;
}

template <class T>
Tensor<T> max_pool2d_adjoint(const Shape& in_shape, const std::vector<std::size_t>& argmax,
                             const Tensor<T>& dy) {
  Tensor<T> dx(in_shape);
  for (std::size_t o = 0; o < dy.size(); ++o) dx[argmax[o]] += dy[o];
  return dx;
}

namespace detail {
// Source coordinate for output index `i` under the half-pixel convention,
// clamped to the valid range.
struct Tap {
  std::size_t lo, hi;
  double frac;
};

inline Tap bilinear_tap(std::size_t i, std::size_t in, std::size_t out) {
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
  if (src < 0.0) src = 0.0;
  const double maxc = static_cast<double>(in - 1);
  if (src > maxc) src = maxc;
  const auto lo = static_cast<std::size_t>(std::floor(src));
  const std::size_t hi = std::min(lo + 1, in - 1);
  return {lo, hi, src - static_cast<double>(lo)};
}
}  // namespace detail

/// Bilinear resize of an H x W x C map (align_corners = false, edge clamp).
template <class T>
Tensor<T> bilinear_resize(const Tensor<T>& map, std::size_t h_out, std::size_t w_out) {
  require_rank(map.shape(), 3, "bilinear_resize");
  if (h_out == 0 || w_out == 0) throw DimensionError("bilinear_resize: output extents must be >= 1");
  const std::size_t h = map.dim(0), w = map.dim(1), c = map.dim(2);
  if (h == h_out && w == w_out) return map;
  Tensor<T> out({h_out, w_out, c});
  for (std::size_t i = 0; i < h_out; ++i) {
    const auto ty = detail::bilinear_tap(i, h, h_out);
    const T fy = static_cast<T>(ty.frac);
    for (std::size_t j = 0; j < w_out; ++j) {
      const auto tx = detail::bilinear_tap(j, w, w_out);
      const T fx = static_cast<T>(tx.frac);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const T top = map(ty.lo, tx.lo, ch) * (T(1) - fx) + map(ty.lo, tx.hi, ch) * fx;
        const T bot = map(ty.hi, tx.lo, ch) * (T(1) - fx) + map(ty.hi, tx.hi, ch) * fx;
        out(i, j, ch) = top * (T(1) - fy) + bot * fy;
      }
    }
  }
  return out;
}

template <class T>
Tensor<T> bilinear_resize_adjoint(const Shape& in_shape, const Tensor<T>& dy) {
  const std::size_t h = in_shape[0], w = in_shape[1], c = in_shape[2];
  const std::size_t h_out = dy.dim(0), w_out = dy.dim(1);
  if (h == h_out && w == w_out) return dy;
  Tensor<T> dx(in_shape);
  for (std::size_t i = 0; i < h_out; ++i) {
    const auto ty = detail::bilinear_tap(i, h, h_out);
    const T fy = static_cast<T>(ty.frac);
    for (std::size_t j = 0; j < w_out; ++j) {
      const auto tx = detail::bilinear_tap(j, w, w_out);
      const T fx = static_cast<T>(tx.frac);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const T g = dy(i, j, ch);
        dx(ty.lo, tx.lo, ch) += g * (T(1) - fy) * (T(1) - fx);
        dx(ty.lo, tx.hi, ch) += g * (T(1) - fy) * fx;
        dx(ty.hi, tx.lo, ch) += g * fy * (T(1) - fx);
        dx(ty.hi, tx.hi, ch) += g * fy * fx;
      }
    }
  }
  return dx;
}

/// Moves each s x s spatial block into the channel axis: output pixel (i, j)
/// holds the block flattened row-major, channel slot (di * s + dj) * C + c.
template <class T>
Tensor<T> space_to_depth(const Tensor<T>& map, std::size_t s) {
  require_pool_divisible(map.shape(), s, "space_to_depth");
  const std::size_t h = map.dim(0), w = map.dim(1), c = map.dim(2);
  Tensor<T> out({h / s, w / s, s * s * c});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t ch = 0; ch < c; ++ch)
        out(i / s, j / s, ((i % s) * s + (j % s)) * c + ch) = map(i, j, ch);
  return out;
}

template <class T>
Tensor<T> depth_to_space(const Tensor<T>& packed, std::size_t s) {
  require_rank(packed.shape(), 3, "depth_to_space");
  const std::size_t c = packed.dim(2) / (s * s);
  Tensor<T> out({packed.dim(0) * s, packed.dim(1) * s, c});
  for (std::size_t i = 0; i < out.dim(0); ++i)
    for (std::size_t j = 0; j < out.dim(1); ++j)
      for (std::size_t ch = 0; ch < c; ++ch)
        out(i, j, ch) = packed(i / s, j / s, ((i % s) * s + (j % s)) * c + ch);
  return out;
}

}  // namespace dmff::kernels
