#pragma once

// Symbolic multiply accounting for the dual cross-attention block and the
// concatenated single-encoder baseline, plus runtime probes that count the
// multiplies the implementation actually performs.

#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dmff/cfe.hpp"
#include "dmff/cost_counter.hpp"
#include "dmff/dmff.hpp"
#include "dmff/icfe.hpp"

namespace dmff {

enum class CostVariant {
  kOurs,  // two cross-attention modules over T tokens each
  kCft,   // one self-attention encoder over the 2T concatenated tokens
};

inline std::string_view to_string(CostVariant v) { return v == CostVariant::kOurs ? "ours" : "cft"; }

inline CostVariant parse_cost_variant(std::string_view s) {
  if (s == "ours") return CostVariant::kOurs;
  if (s == "cft") return CostVariant::kCft;
  throw ConfigError("unknown cost variant '" + std::string(s) + "'");
}

/// coefficient * T^t * C^c * h^h / divisor
struct Monomial {
  std::int64_t coefficient = 0;
  int t_power = 0;
  int c_power = 0;
  int h_power = 0;
  std::int64_t divisor = 1;
};

struct CostExpr {
  std::vector<Monomial> terms;

  /// Exact integer evaluation; throws if a divisor does not divide its term.
  std::int64_t evaluate(std::int64_t t, std::int64_t c, std::int64_t h = 0) const {
    std::int64_t total = 0;
    for (const auto& m : terms) {
      std::int64_t v = m.coefficient;
      for (int i = 0; i < m.t_power; ++i) v *= t;
      for (int i = 0; i < m.c_power; ++i) v *= c;
      for (int i = 0; i < m.h_power; ++i) v *= h;
      if (v % m.divisor != 0) {
        throw ConfigError("cost term " + std::to_string(v) + " not divisible by " + std::to_string(m.divisor));
      }
      total += v / m.divisor;
    }
    return total;
  }

  /// Merges monomials that differ only in coefficient.
  CostExpr collapsed() const {
    CostExpr out;
    for (const auto& m : terms) {
      bool merged = false;
      for (auto& o : out.terms) {
        if (o.t_power == m.t_power && o.c_power == m.c_power && o.h_power == m.h_power && o.divisor == m.divisor) {
          o.coefficient += m.coefficient;
          merged = true;
          break;
        }
      }
      if (!merged) out.terms.push_back(m);
    }
    return out;
  }

  std::string str() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const auto& m = terms[i];
      if (i) os << " + ";
      os << m.coefficient;
      auto factor = [&](const char* sym, int p) {
        if (p == 1) os << '*' << sym;
        if (p > 1) os << '*' << sym << '^' << p;
      };
      factor("T", m.t_power);
      factor("C", m.c_power);
      factor("h", m.h_power);
      if (m.divisor != 1) os << '/' << m.divisor;
    }
    return os.str();
  }
};

inline CostExpr operator+(CostExpr a, const CostExpr& b) {
  a.terms.insert(a.terms.end(), b.terms.begin(), b.terms.end());
  return a;
}

struct AttentionCost {
  CostExpr scores;        // Q * K^T
  CostExpr weighted_sum;  // softmax(...) * V
  CostExpr total() const { return (scores + weighted_sum).collapsed(); }
};

/// Ours: two modules, T^2*C each per step. CFT: one encoder over 2T tokens,
/// (2T)^2*C = 4*T^2*C per step.
inline AttentionCost attention_cost(CostVariant v) {
  const std::int64_t k = v == CostVariant::kOurs ? 2 : 4;
  return {CostExpr{{{k, 2, 1, 0, 1}}}, CostExpr{{{k, 2, 1, 0, 1}}}};
}

inline AttentionCost attention_cost(std::string_view variant) { return attention_cost(parse_cost_variant(variant)); }

/// Both variants cost 4*T*C*h: ours runs two FFNs over T tokens, CFT one
/// FFN over 2T tokens, each FFN doing 2*tokens*C*h multiplies.
inline CostExpr ffn_cost(CostVariant) { return CostExpr{{{4, 1, 1, 1, 1}}}; }

inline CostExpr ffn_cost(std::string_view variant) { return ffn_cost(parse_cost_variant(variant)); }

/// Literal FFN row of the published comparison table, in T*C^2 units.
inline CostExpr published_ffn_row(CostVariant v) {
  return CostExpr{{{v == CostVariant::kOurs ? 8 : 16, 1, 2, 0, 1}}};
}

/// Literal total row of the published comparison table.
inline CostExpr published_total_row(CostVariant v) {
  const std::int64_t attn = v == CostVariant::kOurs ? 2 : 4;
  return CostExpr{{{attn, 2, 1, 0, 1}, {16, 1, 2, 0, 1}}};
}

/// FFN width (as a multiple of C) that makes 4*T*C*h equal a T*C^2 coefficient.
inline double implied_hidden_multiple(std::int64_t tc2_coefficient) { return static_cast<double>(tc2_coefficient) / 4.0; }

struct ShrinkReduction {
  CostExpr before;  // evaluated at T = W*H
  CostExpr after;
  std::int64_t tokens = 0;  // W*H
  std::int64_t before_value = 0;
  std::int64_t after_value = 0;
};

/// Cost of the block before and after shrinking the token count by S:
///   before = T^2*C + 8*T*C^2,  after = T^2*C/S^2 + 8*T*C^2/S,  T = W*H.
inline ShrinkReduction shrink_reduction(std::int64_t w, std::int64_t h, std::int64_t c, std::int64_t s) {
  if (w < 1 || h < 1 || c < 1 || s < 1) throw ConfigError("shrink_reduction: arguments must be >= 1");
  const std::int64_t t = w * h;
  if (t % s != 0) throw ConfigError("shrink_reduction: S=" + std::to_string(s) + " does not divide " + std::to_string(t));
  ShrinkReduction r;
  r.before = CostExpr{{{1, 2, 1, 0, 1}, {8, 1, 2, 0, 1}}};
  r.after = CostExpr{{{1, 2, 1, 0, s * s}, {8, 1, 2, 0, s}}};
  r.tokens = t;
  r.before_value = r.before.evaluate(t, c);
  r.after_value = r.after.evaluate(t, c);
  return r;
}

// ---------------------------------------------------------------------------
// Parameter counting

struct ParamBreakdown {
  std::vector<std::pair<std::string, std::size_t>> tensors;
  std::size_t total = 0;
};

template <class Visitable>
ParamBreakdown param_breakdown(const Visitable& v) {
  ParamBreakdown b;
  v.visit([&](const std::string& name, const auto& t) {
    b.tensors.emplace_back(name, t.size());
    b.total += t.size();
  });
  return b;
}

template <class T>
ParamBreakdown param_breakdown(const CfeParams<T>& p) {
  ParamBreakdown b;
  p.visit("", [&](const std::string& name, const auto& t) {
    b.tensors.emplace_back(name, t.size());
    b.total += t.size();
  });
  return b;
}

template <class Visitable>
std::size_t param_count(const Visitable& v) {
  return param_breakdown(v).total;
}

// ---------------------------------------------------------------------------
// Runtime probes

/// Counts multiplies actually performed by the attention stage at token
/// count T and width C. Ours runs the two cross-attention directions; CFT
/// runs one self-attention over the concatenated 2T tokens.
inline MulTally measure_attention(CostVariant v, std::size_t t, std::size_t c, std::size_t heads, std::uint64_t seed = 7) {
  Rng rng(seed);
  auto tokens = [&](std::size_t n) {
    Tensor<double> x({n, c});
    for (auto& e : x.data()) e = rng.uniform(-1, 1);
    return x;
  };
  Tape<double> tape;
  MulTally tally;
  if (v == CostVariant::kOurs) {
    auto pr = CfeParams<double>::init(c, c, heads, rng);
    auto pt = CfeParams<double>::init(c, c, heads, rng);
    TokenSeq<double> tr{tape.constant(tokens(t)), t, 1};
    TokenSeq<double> tt{tape.constant(tokens(t)), t, 1};
    auto vr = bind_cfe(tape, pr, "r.");
    auto vt = bind_cfe(tape, pt, "t.");
    ScopedTally scope(tally);
    cross_attention(tt, tr, vr);
    cross_attention(tr, tt, vt);
  } else {
    auto p = CfeParams<double>::init(c, c, heads, rng);
    TokenSeq<double> all{tape.constant(tokens(2 * t)), 2 * t, 1};
    auto vp = bind_cfe(tape, p, "");
    ScopedTally scope(tally);
    cross_attention(all, all, vp);
  }
  return tally;
}

/// Counts FFN multiplies: ours applies two FFNs to T tokens, CFT one FFN to 2T.
inline std::uint64_t measure_ffn(CostVariant v, std::size_t t, std::size_t c, std::size_t h, std::uint64_t seed = 7) {
  Rng rng(seed);
  Tape<double> tape;
  MulTally tally;
  auto run = [&](std::size_t rows, const std::string& prefix) {
    Tensor<double> x({rows, c});
    for (auto& e : x.data()) e = rng.uniform(-1, 1);
    auto p = CfeParams<double>::init(c, h, 1, rng);
    auto vars = bind_cfe(tape, p, prefix);
    Var<double> in = tape.constant(std::move(x));
    ScopedTally scope(tally);
    feed_forward(in, vars);
  };
  if (v == CostVariant::kOurs) {
    run(t, "r.");
    run(t, "t.");
  } else {
    run(2 * t, "");
  }
  return tally[CostTag::kFfn];
}

// ---------------------------------------------------------------------------
// Audit report

struct AuditRow {
  std::string variant;
  std::string term;
  std::string expression;
  std::int64_t value = 0;
};

/// Rows for the comparison table at concrete (T, C, h), followed by the
/// published-row consistency notes.
inline std::vector<AuditRow> audit_rows(std::int64_t t, std::int64_t c, std::int64_t h) {
  std::vector<AuditRow> rows;
  for (auto v : {CostVariant::kCft, CostVariant::kOurs}) {
    const std::string name(to_string(v));
    const auto a = attention_cost(v);
    const auto f = ffn_cost(v);
    rows.push_back({name, "QK^T", a.scores.str(), a.scores.evaluate(t, c, h)});
    rows.push_back({name, "softmax*V", a.weighted_sum.str(), a.weighted_sum.evaluate(t, c, h)});
    rows.push_back({name, "FFN", f.str(), f.evaluate(t, c, h)});
    const auto total = (a.total() + f).collapsed();
    rows.push_back({name, "Total", total.str(), total.evaluate(t, c, h)});
    const auto pf = published_ffn_row(v);
    rows.push_back({name, "FFN (published row)", pf.str(), pf.evaluate(t, c, h)});
    const auto pt = published_total_row(v);
    rows.push_back({name, "Total (published row)", pt.str(), pt.evaluate(t, c, h)});
  }
  return rows;
}

/// Human-readable notes on which FFN width each published entry implies.
inline std::vector<std::string> audit_notes() {
  std::ostringstream a, b, d;
  a << "cft FFN row 16*T*C^2 implies h = " << implied_hidden_multiple(16) << "*C";
  b << "ours FFN row 8*T*C^2 implies h = " << implied_hidden_multiple(8) << "*C";
  d << "ours Total row FFN term 16*T*C^2 implies h = " << implied_hidden_multiple(16)
    << "*C: INCONSISTENT with the ours FFN row (h = " << implied_hidden_multiple(8) << "*C)";
  return {a.str(), b.str(), d.str()};
}

}  // namespace dmff
