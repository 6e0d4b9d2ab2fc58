#pragma once

// Differentiable operations on tape variables.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dmff/autodiff.hpp"
#include "dmff/cost_counter.hpp"
#include "dmff/kernels.hpp"

namespace dmff::ops {

using kernels::PoolKind;

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  auto& tape = a.tape();
  Tensor<T> c = kernels::matmul(a.value(), b.value());
  count_multiplies(static_cast<std::uint64_t>(a.dim(0)) * a.dim(1) * b.dim(1));
  return tape.record(std::move(c), {a, b}, [a, b](Tape<T>& t, const Tensor<T>& g) {
    if (t.requires_grad(a.id())) t.accumulate(a.id(), kernels::matmul(g, kernels::transpose(b.value())));
    if (t.requires_grad(b.id())) t.accumulate(b.id(), kernels::matmul(kernels::transpose(a.value()), g));
  });
}

template <class T>
Var<T> transpose(Var<T> a) {
  return a.tape().record(kernels::transpose(a.value()), {a}, [a](Tape<T>& t, const Tensor<T>& g) {
    t.accumulate(a.id(), kernels::transpose(g));
  });
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  a.value().require_same_shape(b.value(), "add");
  Tensor<T> c = a.value();
  c += b.value();
  return a.tape().record(std::move(c), {a, b}, [a, b](Tape<T>& t, const Tensor<T>& g) {
    t.accumulate(a.id(), g);
    t.accumulate(b.id(), g);
  });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  a.value().require_same_shape(b.value(), "sub");
  Tensor<T> c = a.value();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] -= b.value()[i];
  return a.tape().record(std::move(c), {a, b}, [a, b](Tape<T>& t, const Tensor<T>& g) {
    t.accumulate(a.id(), g);
    Tensor<T> ng = g;
    for (auto& v : ng.data()) v = -v;
    t.accumulate(b.id(), std::move(ng));
  });
}

// s * x where s is a one-element variable.
template <class T>
Var<T> scale_by(Var<T> x, Var<T> s) {
  if (s.value().size() != 1) throw DimensionError("scale_by: scale must have one element, got " + shape_str(s.shape()));
  const T sv = s.value()[0];
  Tensor<T> y = x.value();
  for (auto& v : y.data()) v *= sv;
  return x.tape().record(std::move(y), {x, s}, [x, s](Tape<T>& t, const Tensor<T>& g) {
    const T sv = s.value()[0];
    if (t.requires_grad(x.id())) {
      Tensor<T> gx = g;
      for (auto& v : gx.data()) v *= sv;
      t.accumulate(x.id(), std::move(gx));
    }
    if (t.requires_grad(s.id())) {
      T acc = 0;
      const auto& xv = x.value();
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
      t.accumulate(s.id(), Tensor<T>(s.shape(), acc));
    }
  });
}

// a * x + b with constant a, b.
template <class T>
Var<T> affine(Var<T> x, T a, T b) {
  Tensor<T> y = x.value();
  for (auto& v : y.data()) v = a * v + b;
  return x.tape().record(std::move(y), {x}, [x, a](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T> gx = g;
    for (auto& v : gx.data()) v *= a;
    t.accumulate(x.id(), std::move(gx));
  });
}

// [R x C] + bias[C] broadcast over rows.
template <class T>
Var<T> add_row_bias(Var<T> x, Var<T> bias) {
  kernels::require_rank(x.shape(), 2, "add_row_bias");
  const std::size_t r = x.dim(0), c = x.dim(1);
  if (bias.value().size() != c) {
    throw DimensionError("add_row_bias: bias " + shape_str(bias.shape()) + " vs input " + shape_str(x.shape()));
  }
  Tensor<T> y = x.value();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y(i, j) += bias.value()[j];
  return x.tape().record(std::move(y), {x, bias}, [x, bias, r, c](Tape<T>& t, const Tensor<T>& g) {
    t.accumulate(x.id(), g);
    if (t.requires_grad(bias.id())) {
      Tensor<T> gb(bias.shape());
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gb[j] += g(i, j);
      t.accumulate(bias.id(), std::move(gb));
    }
  });
}

template <class T>
Var<T> relu(Var<T> x) {
  Tensor<T> y = x.value();
  for (auto& v : y.data()) v = v > T(0) ? v : T(0);
  return x.tape().record(std::move(y), {x}, [x](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T> gx = g;
    const auto& xv = x.value();
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (!(xv[i] > T(0))) gx[i] = T(0);
    t.accumulate(x.id(), std::move(gx));
  });
}

template <class T>
Var<T> sigmoid(Var<T> x) {
  Tensor<T> y = x.value();
  for (auto& v : y.data()) v = T(1) / (T(1) + std::exp(-v));
  return x.tape().record(y, {x}, [x, y](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T> gx = g;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= y[i] * (T(1) - y[i]);
    t.accumulate(x.id(), std::move(gx));
  });
}

template <class T>
Var<T> softmax_rows(Var<T> m) {
  Tensor<T> y = kernels::softmax_rows(m.value());
  return m.tape().record(y, {m}, [m, y](Tape<T>& t, const Tensor<T>& g) {
    t.accumulate(m.id(), kernels::softmax_rows_adjoint(y, g));
  });
}

// Columns [begin, begin + width) of a matrix.
template <class T>
Var<T> slice_cols(Var<T> x, std::size_t begin, std::size_t width) {
  kernels::require_rank(x.shape(), 2, "slice_cols");
  const std::size_t r = x.dim(0), c = x.dim(1);
  if (width == 0 || begin + width > c) throw DimensionError("slice_cols: range out of bounds for " + shape_str(x.shape()));
  Tensor<T> y({r, width});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < width; ++j) y(i, j) = x.value()(i, begin + j);
  return x.tape().record(std::move(y), {x}, [x, begin, width, r](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T> gx(x.shape());
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < width; ++j) gx(i, begin + j) = g(i, j);
    t.accumulate(x.id(), std::move(gx));
  });
}

template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t r = parts[0].dim(0);
  std::size_t total = 0;
  for (const auto& p : parts) {
    kernels::require_rank(p.shape(), 2, "concat_cols");
    if (p.dim(0) != r) throw DimensionError("concat_cols: row counts differ");
    total += p.dim(1);
  }
  Tensor<T> y({r, total});
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < p.dim(1); ++j) y(i, off + j) = p.value()(i, j);
    off += p.dim(1);
  }
  return parts[0].tape().record(std::move(y), parts, [parts, r](Tape<T>& t, const Tensor<T>& g) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      const std::size_t w = p.dim(1);
      if (t.requires_grad(p.id())) {
        Tensor<T> gp({r, w});
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < w; ++j) gp(i, j) = g(i, off + j);
        t.accumulate(p.id(), std::move(gp));
      }
      off += w;
    }
  });
}

template <class T>
Var<T> reshape(Var<T> x, Shape shape) {
  Tensor<T> y = x.value().reshaped(std::move(shape));
  return x.tape().record(std::move(y), {x}, [x](Tape<T>& t, const Tensor<T>& g) {
    t.accumulate(x.id(), g.reshaped(x.shape()));
  });
}

template <class T>
Var<T> pool2d(Var<T> map, std::size_t s, PoolKind kind) {
  if (kind == PoolKind::kAvg) {
    Tensor<T> y = kernels::pool2d(map.value(), s, kind);
    return map.tape().record(std::move(y), {map}, [map, s](Tape<T>& t, const Tensor<T>& g) {
      t.accumulate(map.id(), kernels::avg_pool2d_adjoint(map.shape(), s, g));
    });
  }
  std::vector<std::size_t> argmax;
  Tensor<T> y = kernels::pool2d(map.value(), s, kind, &argmax);
  return map.tape().record(std::move(y), {map}, [map, argmax = std::move(argmax)](Tape<T>& t, const Tensor<T>& g) {
    t.accumulate(map.id(), kernels::max_pool2d_adjoint(map.shape(), argmax, g));
  });
}

template <class T>
Var<T> bilinear_resize(Var<T> map, std::size_t h_out, std::size_t w_out) {
  Tensor<T> y = kernels::bilinear_resize(map.value(), h_out, w_out);
  return map.tape().record(std::move(y), {map}, [map](Tape<T>& t, const Tensor<T>& g) {
    t.accumulate(map.id(), kernels::bilinear_resize_adjoint(map.shape(), g));
  });
}

template <class T>
Var<T> space_to_depth(Var<T> map, std::size_t s) {
  Tensor<T> y = kernels::space_to_depth(map.value(), s);
  return map.tape().record(std::move(y), {map}, [map, s](Tape<T>& t, const Tensor<T>& g) {
    t.accumulate(map.id(), kernels::depth_to_space(g, s));
  });
}

// Sum of all elements, as a one-element tensor.
template <class T>
Var<T> sum(Var<T> x) {
  T acc = 0;
  for (auto v : x.value().data()) acc += v;
  return x.tape().record(Tensor<T>::scalar(acc), {x}, [x](Tape<T>& t, const Tensor<T>& g) {
    t.accumulate(x.id(), Tensor<T>(x.shape(), g[0]));
  });
}

// mean((x - target)^2) against a constant target.
template <class T>
Var<T> mean_squared_error(Var<T> x, const Tensor<T>& target) {
  x.value().require_same_shape(target, "mean_squared_error");
  const T n = static_cast<T>(target.size());
  T acc = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const T d = x.value()[i] - target[i];
    acc += d * d;
  }
  return x.tape().record(Tensor<T>::scalar(acc / n), {x}, [x, target, n](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T> gx(x.shape());
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = g[0] * T(2) * (x.value()[i] - target[i]) / n;
    t.accumulate(x.id(), std::move(gx));
  });
}

}  // namespace dmff::ops
