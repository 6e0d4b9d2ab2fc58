// Acceptance gate: prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dmff/all.hpp"

namespace {

using namespace dmff;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

// 1. Gradient fidelity of the default pipeline.
Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  DmffConfig cfg;  // H=W=8 below, C=16, heads 8, h 64, s 2, n 1, mode D
  GradCheckOptions opt;  // eps 1e-5, tol 1e-4, 20 coordinates per tensor
  const auto report = grad_check(cfg, 8, 8, 16, 2024, opt);
  const double secs = seconds_since(t0);
  std::size_t fewest = SIZE_MAX;
  std::string worst;
  double worst_err = -1;
  for (const auto& t : report.tensors) {
    fewest = std::min(fewest, t.checked);
    if (t.max_rel_error > worst_err) {
      worst_err = t.max_rel_error;
      worst = t.name;
    }
  }
  Outcome o;
  o.pass = report.passed() && secs < 60.0 && !report.tensors.empty();
  o.detail = std::to_string(report.tensors.size()) + " tensors, max rel err " + fmt(worst_err) + " (" + worst +
             "), tol 1e-4, " + fmt(secs) + " s";
  return o;
}

// 2. Attention cost ratio and runtime counters.
Outcome attention_ratio() {
  Outcome o;
  int cells = 0;
  for (std::int64_t t : {4, 16, 64}) {
    for (std::int64_t c : {8, 16}) {
      const auto ours = attention_cost(CostVariant::kOurs).total().evaluate(t, c);
      const auto cft = attention_cost(CostVariant::kCft).total().evaluate(t, c);
      const auto m_ours = static_cast<std::int64_t>(measure_attention(CostVariant::kOurs, t, c, 8).attention());
      const auto m_cft = static_cast<std::int64_t>(measure_attention(CostVariant::kCft, t, c, 8).attention());
      if (2 * ours != cft || m_ours != ours || m_cft != cft) {
        o.pass = false;
        o.detail += "T=" + std::to_string(t) + " C=" + std::to_string(c) + " mismatch; ";
      }
      ++cells;
    }
  }
  o.detail += std::to_string(cells) + " (T,C) cells, ours/cft = 1/2, counters equal formulas";
  return o;
}

// 3. Shrink scaling measured in the running pipeline.
Outcome shrink_scaling() {
  auto measure = [](std::size_t window) {
    DmffConfig cfg;
    cfg.shrink_window = window;
    auto wts = DmffWeights<double>::init(cfg, 8, 8, 16, 3);
    Rng rng(4);
    MulTally tally;
    {
      ScopedTally scope(tally);
      dmff_fuse(random_tensor({8, 8, 16}, rng), random_tensor({8, 8, 16}, rng), cfg, wts);
    }
    return tally;
  };
  const auto full = measure(1);   // S = 1
  const auto small = measure(2);  // 2x2 window, S = 4
  const auto red = shrink_reduction(8, 8, 16, 4);
  Outcome o;
  o.pass = full.attention() == 16 * small.attention() && full[CostTag::kFfn] == 4 * small[CostTag::kFfn] &&
           red.before.terms.size() == 2 &&
           CostExpr{{red.before.terms[0]}}.evaluate(64, 16) == 16 * CostExpr{{red.after.terms[0]}}.evaluate(64, 16) &&
           CostExpr{{red.before.terms[1]}}.evaluate(64, 16) == 4 * CostExpr{{red.after.terms[1]}}.evaluate(64, 16);
  o.detail = "attention " + std::to_string(full.attention()) + " -> " + std::to_string(small.attention()) + ", FFN " +
             std::to_string(full[CostTag::kFfn]) + " -> " + std::to_string(small[CostTag::kFfn]);
  return o;
}

// 4. Parameter count constant under iteration, linear under stacking.
Outcome parameter_sharing() {
  Outcome o;
  DmffConfig cfg;
  auto base = DmffWeights<double>::init(cfg, 8, 8, 16, 5);
  const std::size_t icfe1 = param_count(base.icfe);
  for (std::size_t n : {0u, 1u, 2u, 3u, 10u}) {
    auto c = cfg;
    c.iterations = n;
    const auto w = DmffWeights<double>::init(c, 8, 8, 16, 5);
    if (param_count(w.icfe) != icfe1 || param_count(w) != param_count(base)) o.pass = false;
  }
  Rng rng(6);
  const std::size_t one = param_count(StackedParams<double>::init(1, 16, 64, 8, rng));
  for (std::size_t k : {1u, 2u, 4u, 6u, 8u, 10u}) {
    if (param_count(StackedParams<double>::init(k, 16, 64, 8, rng)) != k * one) o.pass = false;
  }
  o.detail = "icfe params " + std::to_string(icfe1) + " for n in {0,1,2,3,10}; stacked block " + std::to_string(one) +
             " x k for k in {1,2,4,6,8,10}";
  return o;
}

// 5. Identity bypass.
Outcome identity_bypass() {
  Rng rng(7);
  auto p = CfeParams<double>::init(16, 64, 8, rng);
  p.set_coefficients(0, 1, 1, 0);
  const auto target = random_tensor({16, 16}, rng), aux = random_tensor({16, 16}, rng);
  Tape<double> tape;
  auto vars = bind_cfe(tape, p, "");
  const auto out = cfe_forward(TokenSeq<double>{tape.constant(target), 4, 4}, TokenSeq<double>{tape.constant(aux), 4, 4},
                               vars)
                       .tokens.value();
  const bool exact = out == target;

  DmffConfig d;
  d.shrink_window = 1;
  auto wts = DmffWeights<double>::init(d, 8, 8, 16, 8);
  wts.icfe.cfe_r->set_coefficients(0, 1, 1, 0);
  wts.icfe.cfe_t->set_coefficients(0, 1, 1, 0);
  // Positional embeddings enter before the block and would survive the bypass.
  wts.pe_r->fill(0.0);
  wts.pe_t->fill(0.0);
  DmffConfig e = d;
  e.mode = FusionMode::kE;
  const auto a = random_tensor({8, 8, 16}, rng), b = random_tensor({8, 8, 16}, rng);
  const double diff = max_abs_diff(dmff_fuse(a, b, d, wts), dmff_fuse(a, b, e, wts));
  Outcome o;
  o.pass = exact && diff < 1e-9;
  o.detail = std::string("cfe bypass ") + (exact ? "bit-exact" : "NOT exact") + ", mode D vs E max diff " + fmt(diff);
  return o;
}

// 6. Softmax rows and key/value permutation invariance.
Outcome attention_invariants() {
  Rng rng(9);
  double worst_row = 0, worst_perm = 0;
  for (int trial = 0; trial < 5; ++trial) {
    auto p = CfeParams<double>::init(16, 64, 8, rng);
    const double scale = trial < 3 ? 1.0 : 50.0;
    const auto target = random_tensor({16, 16}, rng, -scale, scale), aux = random_tensor({16, 16}, rng, -scale, scale);
    std::vector<std::size_t> perm(16);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = 15; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    Tensor<double> permuted(target.shape());
    for (std::size_t i = 0; i < 16; ++i)
      for (std::size_t k = 0; k < 16; ++k) permuted(i, k) = target(perm[i], k);

    auto run = [&](const Tensor<double>& kv, double beta, std::vector<Tensor<double>>* probs) {
      auto q = p;
      q.beta[0] = beta;
      Tape<double> tape;
      auto vars = bind_cfe(tape, q, "");
      return cfe_forward(TokenSeq<double>{tape.constant(kv), 4, 4}, TokenSeq<double>{tape.constant(aux), 4, 4}, vars,
                         probs)
          .tokens.value();
    };
    std::vector<Tensor<double>> probs;
    run(target, 1.0, &probs);
    for (const auto& m : probs)
      for (std::size_t i = 0; i < m.dim(0); ++i) {
        double s = 0;
        for (std::size_t j = 0; j < m.dim(1); ++j) s += m(i, j);
        worst_row = std::max(worst_row, std::abs(s - 1.0));
      }
    // The target residual carries token order by design, so the invariance is
    // measured on the block with that residual weight set to zero.
    worst_perm = std::max(worst_perm, max_abs_diff(run(target, 0.0, nullptr), run(permuted, 0.0, nullptr)));
  }
  Outcome o;
  o.pass = worst_row <= 1e-9 && worst_perm <= 1e-9;
  o.detail = "max |row sum - 1| " + fmt(worst_row) + ", max permutation diff " + fmt(worst_perm);
  return o;
}

// 7. Round trips.
Outcome round_trips() {
  Rng rng(10);
  bool tokens_ok = true;
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = random_tensor({1 + rng.below(8), 1 + rng.below(8), 1 + rng.below(16)}, rng);
    Tape<double> tape;
    tokens_ok = tokens_ok && detokenize(tokenize(tape.constant(m))).value() == m;
  }
  bool weights_ok = true;
  for (auto mode : {FusionMode::kA, FusionMode::kB, FusionMode::kC, FusionMode::kD, FusionMode::kE}) {
    DmffConfig cfg;
    cfg.mode = mode;
    const auto w = DmffWeights<float>::init(cfg, 8, 8, 16, 11);
    std::stringstream first;
    write_weights(first, w);
    const auto back = read_weights<float>(first);
    std::vector<Tensor<float>> a, b;
    w.visit([&](const std::string&, const Tensor<float>& t) { a.push_back(t); });
    back.visit([&](const std::string&, const Tensor<float>& t) { b.push_back(t); });
    std::stringstream second;
    write_weights(second, back);
    weights_ok = weights_ok && a == b && first.str() == second.str();
  }
  Outcome o;
  o.pass = tokens_ok && weights_ok;
  o.detail = std::string("tokenize/detokenize ") + (tokens_ok ? "exact" : "MISMATCH") + ", save/load " +
             (weights_ok ? "exact" : "MISMATCH");
  return o;
}

// 8. Toy training.
Outcome toy_training() {
  const auto t0 = Clock::now();
  TrainConfig cfg;  // seed 42, 200 steps
  auto run = [&] {
    const auto res = train_toy<float>(cfg);
    std::stringstream trace, weights;
    write_trace_csv(trace, res, cfg);
    write_weights(weights, res.weights);
    return std::make_tuple(res.trace.front().loss, res.final_loss, trace.str(), weights.str());
  };
  const auto [init1, final1, trace1, w1] = run();
  const auto [init2, final2, trace2, w2] = run();
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = final1 <= 0.5 * init1 && trace1 == trace2 && w1 == w2 && secs < 300.0;
  o.detail = "loss " + fmt(init1) + " -> " + fmt(final1) + " (ratio " + fmt(final1 / init1) + "), rerun " +
             (trace1 == trace2 && w1 == w2 ? "byte-identical" : "DIFFERS") + ", " + fmt(secs) + " s for two runs";
  return o;
}

// 9. Input duplication ignores the replaced modality's file.
Outcome duplication_modes() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("dmff_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  Rng rng(12);
  bool ok = true;
  for (auto dup : {InputDuplication::kRgbBoth, InputDuplication::kThermalBoth}) {
    DmffConfig cfg;
    cfg.input_duplication = dup;
    const auto wts = DmffWeights<float>::init(cfg, 8, 8, 16, 13);
    const auto kept = random_tensor({8, 8, 16}, rng).cast<float>();
    std::vector<Tensor<float>> outputs;
    for (int variant = 0; variant < 3; ++variant) {
      const auto other = random_tensor({8, 8, 16}, rng, -10.0 * variant - 1, 10.0 * variant + 1).cast<float>();
      const bool rgb_kept = dup == InputDuplication::kRgbBoth;
      save_rawtensor((dir / "rgb.rt").string(), rgb_kept ? kept : other);
      save_rawtensor((dir / "thermal.rt").string(), rgb_kept ? other : kept);
      outputs.push_back(dmff_fuse(load_rawtensor<float>((dir / "rgb.rt").string()),
                                  load_rawtensor<float>((dir / "thermal.rt").string()), cfg, wts));
    }
    ok = ok && outputs[0] == outputs[1] && outputs[0] == outputs[2];
  }
  fs::remove_all(dir);
  Outcome o;
  o.pass = ok;
  o.detail = std::string("rgb_both and thermal_both outputs ") + (ok ? "bit-identical" : "DIFFER") +
             " under 3 replacements of the other input file";
  return o;
}

// 10. Mixed-pooling endpoints and mixing-weight gradient.
Outcome mixed_pool_endpoints() {
  Rng rng(14);
  const auto m = random_tensor({8, 8, 16}, rng);
  auto pool = [&](double raw) {
    Tape<double> tape;
    return shrink_pool(tape.constant(m), 2, tape.constant(Tensor<double>::scalar(raw))).value();
  };
  const double to_avg = max_abs_diff(pool(20.0), kernels::pool2d(m, 2, kernels::PoolKind::kAvg));
  const double to_max = max_abs_diff(pool(-20.0), kernels::pool2d(m, 2, kernels::PoolKind::kMax));
  const auto target = random_tensor({4, 4, 16}, rng);
  double worst = 0;
  for (double raw : {-2.0, 0.0, 1.3}) {
    auto loss = [&](auto value) {
      using T = decltype(value);
      Tape<T> tape;
      Var<T> lam = tape.parameter("lambda_raw", Tensor<T>::scalar(value));
      Var<T> l = ops::mean_squared_error(shrink_pool(tape.constant(m.cast<T>()), 2, lam), target.cast<T>());
      return std::make_pair(l.value()[0], tape.backward(l).at("lambda_raw")[0]);
    };
    const double analytic = loss(raw).second;
    const long double h = 1e-5L;
    const double numeric =
        static_cast<double>((loss(static_cast<long double>(raw) + h).first - loss(static_cast<long double>(raw) - h).first) /
                            (2 * h));
    worst = std::max(worst, relative_error(analytic, numeric, 1e-12));
  }
  Outcome o;
  o.pass = to_avg <= 1e-6 && to_max <= 1e-6 && worst < 1e-4;
  o.detail = "raw +20 vs avg " + fmt(to_avg) + ", raw -20 vs max " + fmt(to_max) + ", lambda_raw grad rel err " + fmt(worst);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient fidelity", gradient_fidelity},
      {"attention cost ratio", attention_ratio},
      {"shrink scaling", shrink_scaling},
      {"parameter sharing", parameter_sharing},
      {"identity bypass", identity_bypass},
      {"attention invariants", attention_invariants},
      {"round trips", round_trips},
      {"toy training", toy_training},
      {"input duplication", duplication_modes},
      {"mixed-pooling endpoints", mixed_pool_endpoints},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first << "): " << o.detail
              << std::endl;
  }
  std::cout << (failures == 0 ? "ALL CRITERIA PASS" : std::to_string(failures) + " CRITERIA FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
