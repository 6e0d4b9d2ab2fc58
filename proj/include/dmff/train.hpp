#pragma once

// Toy reconstruction training: SGD with momentum, coupled weight decay and a
// cosine-annealed learning rate.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <map>
#include <numbers>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "dmff/dmff.hpp"
#include "dmff/ops.hpp"
#include "dmff/synthetic.hpp"

namespace dmff {

struct TrainConfig {
  double lr0 = 1e-2;
  double lr_min = 0.0;
  double momentum = 0.937;
  double weight_decay = 5e-4;
  std::size_t steps = 200;
  std::uint64_t seed = 42;
  std::size_t samples = 8;
  // Keep residual coefficients, mixing weights and positional embeddings
  // out of weight decay.
  bool exempt_scalars_from_decay = true;
  DmffConfig dmff;
  SyntheticPairSpec data;
};

/// lr_min + (lr0 - lr_min) * (1 + cos(pi * step / total)) / 2
inline double cosine_lr(std::size_t step, std::size_t total, double lr0, double lr_min = 0.0) {
  if (total == 0) return lr0;
  const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total);
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(phase));
}

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

/// Tensors that never receive weight decay.
inline bool decay_exempt(std::string_view name) {
  return ends_with(name, ".alpha") || ends_with(name, ".beta") || ends_with(name, ".gamma") ||
         ends_with(name, ".delta") || ends_with(name, "lambda_raw") || name == "pe_r" || name == "pe_t";
}

/// Heavy-ball SGD: v <- mu * v + (g + wd * p);  p <- p - lr * v.
template <class T>
class SgdMomentum {
 public:
  SgdMomentum(double momentum, double weight_decay, bool exempt_scalars = true)
      : momentum_(momentum), weight_decay_(weight_decay), exempt_scalars_(exempt_scalars) {}

  /// Updates every tensor of `wts`. Tensors without an entry in `grads` are
  /// treated as having zero gradient.
  void step(DmffWeights<T>& wts, const GradRecord<T>& grads, double lr) {
    wts.visit([&](const std::string& name, Tensor<T>& p) {
      auto [it, fresh] = velocity_.try_emplace(name, p.shape());
      Tensor<T>& v = it->second;
      const auto g = grads.find(name);
      const bool decay = !(exempt_scalars_ && decay_exempt(name));
      const T wd = decay ? static_cast<T>(weight_decay_) : T(0);
      const T mu = static_cast<T>(momentum_);
      const T step = static_cast<T>(lr);
      for (std::size_t i = 0; i < p.size(); ++i) {
        T gi = g == grads.end() ? T(0) : g->second[i];
        gi += wd * p[i];
        v[i] = fresh ? gi : mu * v[i] + gi;
        p[i] -= step * v[i];
      }
    });
  }

 private:
  double momentum_;
  double weight_decay_;
  bool exempt_scalars_;
  std::map<std::string, Tensor<T>> velocity_;
};

struct TraceRow {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

template <class T>
struct TrainResult {
  std::vector<TraceRow> trace;  // loss before each update
  double final_loss = 0.0;      // loss after the last update
  DmffWeights<T> weights;
};

template <class T>
std::vector<SyntheticPair<T>> make_dataset(const TrainConfig& cfg) {
  std::vector<SyntheticPair<T>> data;
  for (std::size_t k = 0; k < cfg.samples; ++k) {
    SyntheticPairSpec spec = cfg.data;
    spec.seed = cfg.data.seed + k;
    data.push_back(gen_synthetic_pair<T>(spec));
  }
  return data;
}

/// Mean reconstruction loss over `data`; accumulates the mean gradient into
/// `grads` when requested.
template <class T>
double dataset_loss(const std::vector<SyntheticPair<T>>& data, const DmffConfig& cfg, const DmffWeights<T>& wts,
                    GradRecord<T>* grads = nullptr) {
  double total = 0.0;
  if (grads) grads->clear();
  const T inv = T(1) / static_cast<T>(data.size());
  for (const auto& sample : data) {
    Tape<T> tape;
    auto out = dmff_fuse(tape.constant(sample.rgb), tape.constant(sample.thermal), cfg, wts);
    Var<T> loss = ops::mean_squared_error(out.fused, sample.target);
    total += static_cast<double>(loss.value()[0]);
    if (grads) {
      auto g = tape.backward(loss, Tensor<T>::scalar(inv));
      for (auto& [name, t] : g) {
        auto [it, fresh] = grads->try_emplace(name, std::move(t));
        if (!fresh) it->second += t;
      }
    }
  }
  return total / static_cast<double>(data.size());
}

template <class T>
TrainResult<T> train_toy(const TrainConfig& cfg) {
  if (cfg.samples == 0) throw ConfigError("train: samples must be >= 1");
  const auto data = make_dataset<T>(cfg);
  TrainResult<T> res;
  res.weights = DmffWeights<T>::init(cfg.dmff, cfg.data.height, cfg.data.width, cfg.data.channels, cfg.seed);
  SgdMomentum<T> opt(cfg.momentum, cfg.weight_decay, cfg.exempt_scalars_from_decay);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    GradRecord<T> grads;
    const double loss = dataset_loss(data, cfg.dmff, res.weights, &grads);
    if (!std::isfinite(loss)) {
      throw DivergenceError("train: loss became non-finite at step " + std::to_string(step) +
                            " (lr " + std::to_string(cosine_lr(step, cfg.steps, cfg.lr0, cfg.lr_min)) + ")");
    }
    const double lr = cosine_lr(step, cfg.steps, cfg.lr0, cfg.lr_min);
    res.trace.push_back({step, lr, loss});
    opt.step(res.weights, grads, lr);
  }
  res.final_loss = dataset_loss(data, cfg.dmff, res.weights);
  if (!std::isfinite(res.final_loss)) throw DivergenceError("train: final loss is non-finite");
  return res;
}

/// CSV trace "step,lr,loss": one row per update plus a final row holding the
/// loss after the last update.
template <class T>
void write_trace_csv(std::ostream& os, const TrainResult<T>& res, const TrainConfig& cfg) {
  os << "step,lr,loss\n" << std::setprecision(17);
  for (const auto& row : res.trace) os << row.step << ',' << row.lr << ',' << row.loss << '\n';
  os << cfg.steps << ',' << cosine_lr(cfg.steps, cfg.steps, cfg.lr0, cfg.lr_min) << ',' << res.final_loss << '\n';
}

}  // namespace dmff
