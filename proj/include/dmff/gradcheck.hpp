#pragma once

// Central finite-difference check of the pipeline's analytic gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "dmff/dmff.hpp"
#include "dmff/ops.hpp"

namespace dmff {

struct TensorCheck {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double tolerance = 0.0;

  bool passed() const {
    return std::all_of(tensors.begin(), tensors.end(), [](const TensorCheck& t) { return t.passed; });
  }
  double max_rel_error() const {
    double m = 0.0;
    for (const auto& t : tensors) m = std::max(m, t.max_rel_error);
    return m;
  }
};

struct GradCheckOptions {
  double eps = 1e-5;
  double tol = 1e-4;
  std::size_t coords_per_tensor = 20;
  std::uint64_t seed = 1;
  // Denominator floor: |a - n| / max(|a|, |n|, floor).
  double floor = 1e-12;
  // Test hook applied to the analytic gradients before comparison.
  std::function<void(GradRecord<double>&)> tamper;
};

/// |a - n| / max(|a|, |n|, floor)
inline double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

/// Inputs for a gradient check: uniform random maps in [-1, 1].
struct GradCheckInputs {
  Tensor<double> rgb, thermal, target;
};

inline GradCheckInputs random_inputs(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  auto map = [&] {
    Tensor<double> t({h, w, c});
    for (auto& v : t.data()) v = rng.uniform(-1.0, 1.0);
    return t;
  };
  GradCheckInputs in;
  in.rgb = map();
  in.thermal = map();
  in.target = map();
  return in;
}

/// Squared-error loss of the fused output against `target`.
template <class T>
T pipeline_loss(const Tensor<T>& rgb, const Tensor<T>& thermal, const Tensor<T>& target, const DmffConfig& cfg,
                const DmffWeights<T>& wts, GradRecord<T>* grads = nullptr) {
  Tape<T> tape;
  auto out = dmff_fuse(tape.constant(rgb), tape.constant(thermal), cfg, wts);
  Var<T> loss = ops::mean_squared_error(out.fused, target);
  if (grads) *grads = tape.backward(loss);
  return loss.value()[0];
}

inline double pipeline_loss(const GradCheckInputs& in, const DmffConfig& cfg, const DmffWeights<double>& wts,
                            GradRecord<double>* grads = nullptr) {
  return pipeline_loss(in.rgb, in.thermal, in.target, cfg, wts, grads);
}

/// Element-wise conversion of every learnable tensor to scalar type U.
template <class U, class T>
DmffWeights<U> weights_cast(const DmffWeights<T>& src) {
  DmffWeights<U> dst = DmffWeights<U>::init(src.config, src.height, src.width, src.channels, 0);
  dst.icfe.shared = src.icfe.shared;
  if (!src.icfe.cfe_r) dst.icfe.cfe_r.reset();
  if (!src.icfe.cfe_t) dst.icfe.cfe_t.reset();
  std::vector<const Tensor<T>*> from;
  src.visit([&](const std::string&, const Tensor<T>& t) { from.push_back(&t); });
  std::size_t i = 0;
  dst.visit([&](const std::string& name, Tensor<U>& t) {
    if (i >= from.size() || from[i]->shape() != t.shape()) {
      throw DimensionError("weights_cast: layout mismatch at '" + name + "'");
    }
    t = from[i++]->template cast<U>();
  });
  return dst;
}

/// Compares analytic and central-difference gradients on up to
/// `coords_per_tensor` random coordinates of every parameter tensor (all
/// coordinates of smaller tensors). Analytic gradients are computed in
/// double; the finite differences are evaluated in extended precision so the
/// difference quotient's rounding noise stays far below the tolerance even
/// for coordinates with very small gradients.
inline GradCheckReport grad_check(const DmffConfig& cfg, const DmffWeights<double>& wts, const GradCheckInputs& in,
                                  const GradCheckOptions& opt = {}) {
  using Wide = long double;
  GradRecord<double> grads;
  pipeline_loss(in, cfg, wts, &grads);
  if (opt.tamper) opt.tamper(grads);

  DmffWeights<Wide> probe = weights_cast<Wide>(wts);
  const Tensor<Wide> rgb = in.rgb.cast<Wide>();
  const Tensor<Wide> thermal = in.thermal.cast<Wide>();
  const Tensor<Wide> target = in.target.cast<Wide>();
  std::vector<std::pair<std::string, Tensor<Wide>*>> params;
  probe.visit([&](const std::string& name, Tensor<Wide>& t) { params.emplace_back(name, &t); });

  GradCheckReport report;
  report.tolerance = opt.tol;
  Rng rng(opt.seed);
  const Wide eps = static_cast<Wide>(opt.eps);
  for (auto& [name, tensor] : params) {
    TensorCheck chk;
    chk.name = name;
    std::vector<std::size_t> coords(tensor->size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > opt.coords_per_tensor) {
      // Partial Fisher-Yates with the library-independent generator.
      for (std::size_t i = 0; i < opt.coords_per_tensor; ++i) {
        std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
      }
      coords.resize(opt.coords_per_tensor);
    }
    const auto git = grads.find(name);
    for (std::size_t idx : coords) {
      const double analytic = git == grads.end() ? 0.0 : git->second[idx];
      const Wide saved = (*tensor)[idx];
      (*tensor)[idx] = saved + eps;
      const Wide lp = pipeline_loss(rgb, thermal, target, cfg, probe);
      (*tensor)[idx] = saved - eps;
      const Wide lm = pipeline_loss(rgb, thermal, target, cfg, probe);
      (*tensor)[idx] = saved;
      const double numeric = static_cast<double>((lp - lm) / (2 * eps));
      chk.max_rel_error = std::max(chk.max_rel_error, relative_error(analytic, numeric, opt.floor));
      ++chk.checked;
    }
    chk.passed = chk.max_rel_error < opt.tol;
    report.tensors.push_back(std::move(chk));
  }
  return report;
}

/// Builds weights and random inputs from seeds and runs the check.
inline GradCheckReport grad_check(const DmffConfig& cfg, std::size_t h, std::size_t w, std::size_t c,
                                  std::uint64_t seed, const GradCheckOptions& opt = {}) {
  auto wts = DmffWeights<double>::init(cfg, h, w, c, seed);
  auto in = random_inputs(h, w, c, seed + 1);
  return grad_check(cfg, std::move(wts), in, opt);
}

}  // namespace dmff
