#pragma once

// Iterated dual CFE with one parameter set reused across iterations, and the
// stacked baseline where each block owns its parameters.

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dmff/cfe.hpp"

namespace dmff {

enum class UpdateOrder {
  kSynchronous,  // both directions read the previous iteration's pair
  kSequential,   // thermal direction reads the freshly enhanced RGB tokens
};

/// Parameters of the iterated block. `cfe_r` enhances RGB (queries from
/// thermal), `cfe_t` enhances thermal (queries from RGB). Either may be
/// absent for single-direction modes. When `shared` is set only `cfe_r` is
/// stored and it drives both directions.
template <class T>
struct IcfeParams {
  std::optional<CfeParams<T>> cfe_r;
  std::optional<CfeParams<T>> cfe_t;
  bool shared = false;
  std::size_t iterations = 1;
  UpdateOrder update = UpdateOrder::kSynchronous;

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
    if (s.shared) {
      if (s.cfe_r) s.cfe_r->visit("cfe_shared.", f);
      return;
    }
    if (s.cfe_r) s.cfe_r->visit("cfe_r.", f);
    if (s.cfe_t) s.cfe_t->visit("cfe_t.", f);
  }
};

template <class T>
struct IcfeVars {
  std::optional<CfeVars<T>> cfe_r;
  std::optional<CfeVars<T>> cfe_t;
  std::size_t iterations = 1;
  UpdateOrder update = UpdateOrder::kSynchronous;
};

template <class T>
IcfeVars<T> bind_icfe(Tape<T>& tape, const IcfeParams<T>& p, const std::string& prefix = "") {
  IcfeVars<T> v;
  v.iterations = p.iterations;
  v.update = p.update;
  if (p.shared) {
    if (!p.cfe_r) throw ConfigError("icfe: shared mode requires a parameter set");
    v.cfe_r = bind_cfe(tape, *p.cfe_r, prefix + "cfe_shared.");
    v.cfe_t = v.cfe_r;
    return v;
  }
  if (p.cfe_r) v.cfe_r = bind_cfe(tape, *p.cfe_r, prefix + "cfe_r.");
  if (p.cfe_t) v.cfe_t = bind_cfe(tape, *p.cfe_t, prefix + "cfe_t.");
  return v;
}

template <class T>
using TokenPair = std::pair<TokenSeq<T>, TokenSeq<T>>;

/// One application of the dual CFE pair. A missing direction leaves its
/// branch unchanged.
template <class T>
TokenPair<T> dual_cfe_step(const TokenSeq<T>& t_r, const TokenSeq<T>& t_t, const std::optional<CfeVars<T>>& cfe_r,
                           const std::optional<CfeVars<T>>& cfe_t, UpdateOrder order) {
  TokenSeq<T> next_r = cfe_r ? cfe_forward(t_r, t_t, *cfe_r) : t_r;
  const TokenSeq<T>& rgb_queries = order == UpdateOrder::kSynchronous ? t_r : next_r;
  TokenSeq<T> next_t = cfe_t ? cfe_forward(t_t, rgb_queries, *cfe_t) : t_t;
  return {next_r, next_t};
}

template <class T>
TokenPair<T> icfe_forward(const TokenSeq<T>& t_r, const TokenSeq<T>& t_t, const IcfeVars<T>& p) {
  TokenPair<T> cur{t_r, t_t};
  for (std::size_t k = 0; k < p.iterations; ++k) {
    cur = dual_cfe_step(cur.first, cur.second, p.cfe_r, p.cfe_t, p.update);
  }
  return cur;
}

/// Independent dual-CFE blocks applied in series.
template <class T>
struct StackedParams {
  std::vector<std::pair<CfeParams<T>, CfeParams<T>>> blocks;

  static StackedParams init(std::size_t count, std::size_t channels, std::size_t hidden, std::size_t heads, Rng& rng) {
    StackedParams s;
    for (std::size_t i = 0; i < count; ++i) {
      auto r = CfeParams<T>::init(channels, hidden, heads, rng);
      auto t = CfeParams<T>::init(channels, hidden, heads, rng);
      s.blocks.emplace_back(std::move(r), std::move(t));
    }
    return s;
  }

  template <class F>
  void visit(F&& f) const {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const std::string b = "block" + std::to_string(i) + ".";
      blocks[i].first.visit(b + "cfe_r.", f);
      blocks[i].second.visit(b + "cfe_t.", f);
    }
  }
};

template <class T>
TokenPair<T> stacked_forward(const TokenSeq<T>& t_r, const TokenSeq<T>& t_t, const StackedParams<T>& p,
                             UpdateOrder order = UpdateOrder::kSynchronous) {
  if (p.blocks.empty()) throw ConfigError("stacked_forward: at least one block required");
  auto& tape = t_r.tokens.tape();
  TokenPair<T> cur{t_r, t_t};
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const std::string b = "block" + std::to_string(i) + ".";
    std::optional<CfeVars<T>> r = bind_cfe(tape, p.blocks[i].first, b + "cfe_r.");
    std::optional<CfeVars<T>> t = bind_cfe(tape, p.blocks[i].second, b + "cfe_t.");
    cur = dual_cfe_step(cur.first, cur.second, r, t, order);
  }
  return cur;
}

}  // namespace dmff
