#pragma once

// Full dual-modal fusion pipeline:
//   shrink -> tokenize (+PE) -> iterated dual CFE -> detokenize
//   -> bilinear resize to H x W -> per-mode output (optionally NIN fusion).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "dmff/icfe.hpp"
#include "dmff/sfs.hpp"
#include "dmff/token_codec.hpp"

namespace dmff {

enum class FusionMode {
  kA,         // enhanced RGB only
  kB,         // enhanced thermal only
  kC,         // dual CFE, one shared parameter set, NIN fused
  kD,         // dual CFE, separate parameter sets, NIN fused
  kE,         // NIN fusion of the raw inputs
  kFRgb,      // raw RGB pass-through
  kFThermal,  // raw thermal pass-through
};

enum class InputDuplication { kNone, kRgbBoth, kThermalBoth };

inline std::string_view to_string(FusionMode m) {
  switch (m) {
    case FusionMode::kA: return "a";
    case FusionMode::kB: return "b";
    case FusionMode::kC: return "c";
    case FusionMode::kD: return "d";
    case FusionMode::kE: return "e";
    case FusionMode::kFRgb: return "f-rgb";
    case FusionMode::kFThermal: return "f-thermal";
  }
  return "?";
}

inline FusionMode parse_fusion_mode(std::string_view s) {
  for (auto m : {FusionMode::kA, FusionMode::kB, FusionMode::kC, FusionMode::kD, FusionMode::kE, FusionMode::kFRgb,
                 FusionMode::kFThermal}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown fusion mode '" + std::string(s) + "'");
}

inline std::string_view to_string(InputDuplication d) {
  switch (d) {
    case InputDuplication::kNone: return "none";
    case InputDuplication::kRgbBoth: return "rgb_both";
    case InputDuplication::kThermalBoth: return "thermal_both";
  }
  return "?";
}

inline InputDuplication parse_input_duplication(std::string_view s) {
  for (auto d : {InputDuplication::kNone, InputDuplication::kRgbBoth, InputDuplication::kThermalBoth}) {
    if (to_string(d) == s) return d;
  }
  throw ConfigError("unknown input duplication '" + std::string(s) + "'");
}

inline std::string_view to_string(ShrinkVariant v) { return v == ShrinkVariant::kPool ? "pool" : "conv"; }

inline ShrinkVariant parse_shrink_variant(std::string_view s) {
  if (s == "pool") return ShrinkVariant::kPool;
  if (s == "conv") return ShrinkVariant::kConv;
  throw ConfigError("unknown shrink variant '" + std::string(s) + "'");
}

inline std::string_view to_string(UpdateOrder u) { return u == UpdateOrder::kSynchronous ? "synchronous" : "sequential"; }

inline UpdateOrder parse_update_order(std::string_view s) {
  if (s == "synchronous") return UpdateOrder::kSynchronous;
  if (s == "sequential") return UpdateOrder::kSequential;
  throw ConfigError("unknown update order '" + std::string(s) + "'");
}

struct DmffConfig {
  ShrinkVariant shrink_variant = ShrinkVariant::kPool;
  std::size_t shrink_window = 2;
  std::size_t heads = 8;
  std::size_t ffn_hidden = 64;
  std::size_t iterations = 1;
  FusionMode mode = FusionMode::kD;
  InputDuplication input_duplication = InputDuplication::kNone;
  UpdateOrder update = UpdateOrder::kSynchronous;

  bool uses_attention() const {
    return mode == FusionMode::kA || mode == FusionMode::kB || mode == FusionMode::kC || mode == FusionMode::kD;
  }
  bool uses_nin() const { return mode == FusionMode::kC || mode == FusionMode::kD || mode == FusionMode::kE; }
  bool shared() const { return mode == FusionMode::kC; }
};

/// All learnable tensors of one pipeline instance. Which members are present
/// depends on the fusion mode the weights were created for.
template <class T>
struct DmffWeights {
  std::size_t height = 0, width = 0, channels = 0;
  DmffConfig config;

  std::optional<ShrinkParams<T>> sfs_r, sfs_t;
  std::optional<Tensor<T>> pe_r, pe_t;
  IcfeParams<T> icfe;
  std::optional<Tensor<T>> nin_w;  // 2C x C
  std::optional<Tensor<T>> nin_b;  // C

  static DmffWeights init(const DmffConfig& cfg, std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
    validate(cfg, h, w, c);
    Rng rng(seed);
    DmffWeights out;
    out.height = h;
    out.width = w;
    out.channels = c;
    out.config = cfg;
    out.icfe.iterations = cfg.iterations;
    out.icfe.update = cfg.update;
    if (cfg.uses_attention()) {
      const std::size_t s = cfg.shrink_window;
      const std::size_t tokens = (h / s) * (w / s);
      out.sfs_r = init_shrink<T>(cfg.shrink_variant, s, c, rng);
      out.sfs_t = init_shrink<T>(cfg.shrink_variant, s, c, rng);
      out.pe_r = init_positional_embedding<T>(tokens, c, rng);
      out.pe_t = init_positional_embedding<T>(tokens, c, rng);
      const bool need_r = cfg.mode != FusionMode::kB;
      const bool need_t = cfg.mode != FusionMode::kA;
      out.icfe.shared = cfg.shared();
      if (need_r) out.icfe.cfe_r = CfeParams<T>::init(c, cfg.ffn_hidden, cfg.heads, rng);
      if (need_t && !cfg.shared()) out.icfe.cfe_t = CfeParams<T>::init(c, cfg.ffn_hidden, cfg.heads, rng);
    }
    if (cfg.uses_nin()) {
      Tensor<T> nw({2 * c, c});
      const double bound = 1.0 / std::sqrt(static_cast<double>(2 * c));
      for (auto& v : nw.data()) v = static_cast<T>(rng.uniform(-bound, bound));
      out.nin_w = std::move(nw);
      out.nin_b = Tensor<T>({c});
    }
    return out;
  }

  static void validate(const DmffConfig& cfg, std::size_t h, std::size_t w, std::size_t c) {
    if (h == 0 || w == 0 || c == 0) throw ConfigError("dmff: extents must be >= 1");
    if (!cfg.uses_attention()) return;
    if (cfg.shrink_window == 0 || h % cfg.shrink_window || w % cfg.shrink_window) {
      throw ConfigError("dmff: map " + std::to_string(h) + "x" + std::to_string(w) + " not divisible by shrink window " +
                        std::to_string(cfg.shrink_window));
    }
    if (cfg.heads == 0 || c % cfg.heads) {
      throw ConfigError("dmff: channels " + std::to_string(c) + " not divisible by heads " + std::to_string(cfg.heads));
    }
    if (cfg.ffn_hidden == 0) throw ConfigError("dmff: ffn_hidden must be >= 1");
  }

  /// Visits (name, tensor) for every learnable tensor in a fixed order.
  template <class F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <class F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

 private:
  template <class Self, class F>
  static void visit_impl(Self& s, F& f) {
    if (s.sfs_r) visit_shrink<T>(*s.sfs_r, "sfs_r.", f);
    if (s.sfs_t) visit_shrink<T>(*s.sfs_t, "sfs_t.", f);
    if (s.pe_r) f(std::string("pe_r"), *s.pe_r);
    if (s.pe_t) f(std::string("pe_t"), *s.pe_t);
    s.icfe.visit(f);
    if (s.nin_w) f(std::string("nin.w"), *s.nin_w);
    if (s.nin_b) f(std::string("nin.b"), *s.nin_b);
  }
};

/// 1x1 convolution over the channel concatenation [f_r, f_t].
template <class T>
Var<T> nin_fuse(Var<T> f_r, Var<T> f_t, Var<T> w, Var<T> b) {
  kernels::require_rank(f_r.shape(), 3, "nin_fuse");
  if (f_r.shape() != f_t.shape()) {
    throw DimensionError("nin_fuse: map shapes differ, " + shape_str(f_r.shape()) + " vs " + shape_str(f_t.shape()));
  }
  const std::size_t h = f_r.dim(0), wd = f_r.dim(1), c = f_r.dim(2);
  if (w.shape() != Shape{2 * c, c} || b.shape() != Shape{c}) {
    throw DimensionError("nin_fuse: weight " + shape_str(w.shape()) + " / bias " + shape_str(b.shape()) +
                         " do not fit " + std::to_string(c) + " channels");
  }
  Var<T> cat = ops::concat_cols<T>({ops::reshape(f_r, {h * wd, c}), ops::reshape(f_t, {h * wd, c})});
  Var<T> y;
  {
    ScopedCostTag tag(CostTag::kFusion);
    y = ops::matmul(cat, w);
  }
  return ops::reshape(ops::add_row_bias(y, b), {h, wd, c});
}

template <class T>
struct DmffOutput {
  Var<T> fused;                   // what the mode emits
  std::optional<Var<T>> rgb;      // re-calibrated enhanced RGB map, when computed
  std::optional<Var<T>> thermal;  // re-calibrated enhanced thermal map, when computed
};

/// True if `wts` holds every tensor `mode` needs.
template <class T>
bool weights_support(const DmffWeights<T>& wts, FusionMode mode) {
  const bool attn = wts.sfs_r && wts.sfs_t && wts.pe_r && wts.pe_t;
  const bool nin = wts.nin_w && wts.nin_b;
  const auto& ic = wts.icfe;
  switch (mode) {
    case FusionMode::kA: return attn && ic.cfe_r.has_value();
    case FusionMode::kB: return attn && (ic.cfe_t.has_value() || (ic.shared && ic.cfe_r.has_value()));
    case FusionMode::kC: return attn && nin && ic.shared && ic.cfe_r.has_value();
    case FusionMode::kD: return attn && nin && !ic.shared && ic.cfe_r.has_value() && ic.cfe_t.has_value();
    case FusionMode::kE: return nin;
    case FusionMode::kFRgb:
    case FusionMode::kFThermal: return true;
  }
  return false;
}

/// Runs the pipeline on H x W x C maps. The mode and input duplication are
/// taken from `cfg`; shrink window, iterations and update order from `cfg` too,
/// so the same weights can be evaluated under compatible configurations.
template <class T>
DmffOutput<T> dmff_fuse(Var<T> f_r, Var<T> f_t, const DmffConfig& cfg, const DmffWeights<T>& wts) {
  kernels::require_rank(f_r.shape(), 3, "dmff_fuse rgb");
  kernels::require_rank(f_t.shape(), 3, "dmff_fuse thermal");
  if (f_r.shape() != f_t.shape()) {
    throw DimensionError("dmff_fuse: input shapes differ, " + shape_str(f_r.shape()) + " vs " + shape_str(f_t.shape()));
  }
  if (cfg.input_duplication == InputDuplication::kRgbBoth) f_t = f_r;
  if (cfg.input_duplication == InputDuplication::kThermalBoth) f_r = f_t;

  if (!weights_support(wts, cfg.mode)) {
    throw ConfigError("dmff_fuse: weights do not provide the tensors mode '" + std::string(to_string(cfg.mode)) +
                      "' needs");
  }
  auto& tape = f_r.tape();
  const std::size_t h = f_r.dim(0), w = f_r.dim(1), c = f_r.dim(2);

  switch (cfg.mode) {
    case FusionMode::kFRgb: return {f_r, std::nullopt, std::nullopt};
    case FusionMode::kFThermal: return {f_t, std::nullopt, std::nullopt};
    case FusionMode::kE:
      return {nin_fuse(f_r, f_t, tape.parameter("nin.w", *wts.nin_w), tape.parameter("nin.b", *wts.nin_b)),
              std::nullopt, std::nullopt};
    default: break;
  }

  DmffWeights<T>::validate(cfg, h, w, c);
  const std::size_t s = cfg.shrink_window;
  if (h != wts.height || w != wts.width || c != wts.channels || s != wts.config.shrink_window) {
    throw DimensionError("dmff_fuse: input " + shape_str(f_r.shape()) + " with window " + std::to_string(s) +
                         " does not match weights built for " + shape_str({wts.height, wts.width, wts.channels}) +
                         " with window " + std::to_string(wts.config.shrink_window));
  }

  Var<T> small_r = shrink(f_r, s, *wts.sfs_r, "sfs_r.");
  Var<T> small_t = shrink(f_t, s, *wts.sfs_t, "sfs_t.");
  TokenSeq<T> t_r = tokenize(small_r, std::optional<Var<T>>(tape.parameter("pe_r", *wts.pe_r)));
  TokenSeq<T> t_t = tokenize(small_t, std::optional<Var<T>>(tape.parameter("pe_t", *wts.pe_t)));

  IcfeParams<T> ic = wts.icfe;
  ic.iterations = cfg.iterations;
  ic.update = cfg.update;
  if (cfg.mode == FusionMode::kA) ic.cfe_t.reset();
  if (cfg.mode == FusionMode::kB && !ic.shared) ic.cfe_r.reset();
  IcfeVars<T> vars = bind_icfe(tape, ic);
  if (cfg.mode == FusionMode::kB && ic.shared) vars.cfe_r.reset();
  if (cfg.mode == FusionMode::kA && ic.shared) vars.cfe_t.reset();
  auto [e_r, e_t] = icfe_forward(t_r, t_t, vars);

  Var<T> map_r = ops::bilinear_resize(detokenize(e_r), h, w);
  Var<T> map_t = ops::bilinear_resize(detokenize(e_t), h, w);
  if (cfg.mode == FusionMode::kA) return {map_r, map_r, std::nullopt};
  if (cfg.mode == FusionMode::kB) return {map_t, std::nullopt, map_t};
  Var<T> fused = nin_fuse(map_r, map_t, tape.parameter("nin.w", *wts.nin_w), tape.parameter("nin.b", *wts.nin_b));
  return {fused, map_r, map_t};
}

/// Tape-free convenience: evaluates the fused output for plain tensors.
template <class T>
Tensor<T> dmff_fuse(const Tensor<T>& f_r, const Tensor<T>& f_t, const DmffConfig& cfg, const DmffWeights<T>& wts) {
  Tape<T> tape;
  auto out = dmff_fuse(tape.constant(f_r), tape.constant(f_t), cfg, wts);
  return out.fused.value();
}

}  // namespace dmff
