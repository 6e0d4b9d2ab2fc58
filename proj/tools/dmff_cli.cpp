// Command-line front end: fuse tensor files, check gradients, train the toy
// task, audit costs and generate synthetic inputs.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "dmff/all.hpp"

namespace {

using namespace dmff;

nlohmann::json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

/// Accepts either a full training config or a bare pipeline config at top level.
TrainConfig load_train_config(const std::string& path) {
  const auto j = read_json(path);
  if (j.is_object() && !j.contains("dmff") && j.contains("mode")) {
    TrainConfig cfg;
    cfg.dmff = dmff_config_from_json(j);
    return cfg;
  }
  return train_config_from_json(j);
}

int run_fuse(const std::string& rgb_path, const std::string& thermal_path, const std::string& weights_path,
             const std::string& mode, const std::optional<std::string>& duplication, const std::string& out_path) {
  const auto rgb = load_rawtensor<float>(rgb_path);
  const auto thermal = load_rawtensor<float>(thermal_path);
  const auto wts = load_weights<float>(weights_path);
  DmffConfig cfg = wts.config;
  cfg.mode = parse_fusion_mode(mode);
  if (duplication) cfg.input_duplication = parse_input_duplication(*duplication);
  if (!weights_support(wts, cfg.mode)) {
    throw ConfigError("weights trained for mode '" + std::string(to_string(wts.config.mode)) +
                      "' cannot run mode '" + mode + "'");
  }
  save_rawtensor(out_path, dmff_fuse(rgb, thermal, cfg, wts));
  return 0;
}

int run_gradcheck(const std::string& config_path, double eps, double tol, std::size_t coords) {
  const TrainConfig tc = load_train_config(config_path);
  GradCheckOptions opt;
  opt.eps = eps;
  opt.tol = tol;
  opt.coords_per_tensor = coords;
  const auto report = grad_check(tc.dmff, tc.data.height, tc.data.width, tc.data.channels, tc.seed, opt);
  std::cout << std::left << std::setw(24) << "tensor" << std::right << std::setw(8) << "coords" << std::setw(16)
            << "max_rel_err" << "  status\n";
  for (const auto& t : report.tensors) {
    std::cout << std::left << std::setw(24) << t.name << std::right << std::setw(8) << t.checked << std::setw(16)
              << std::scientific << std::setprecision(3) << t.max_rel_error << "  " << (t.passed ? "ok" : "FAIL")
              << '\n';
  }
  std::cout << (report.passed() ? "PASS" : "FAIL") << " max relative error " << std::scientific
            << std::setprecision(3) << report.max_rel_error() << " (tol " << tol << ", eps " << eps << ")\n";
  return report.passed() ? 0 : 1;
}

int run_train(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& weights_path,
              const std::string& trace_path) {
  TrainConfig cfg = load_train_config(config_path);
  if (seed) cfg.seed = *seed;
  const auto res = train_toy<float>(cfg);
  std::ofstream trace(trace_path);
  if (!trace) throw ConfigError("cannot open trace file '" + trace_path + "'");
  write_trace_csv(trace, res, cfg);
  save_weights(res.weights, weights_path);
  const double initial = res.trace.empty() ? res.final_loss : res.trace.front().loss;
  std::cout << "steps " << cfg.steps << "  initial loss " << initial << "  final loss " << res.final_loss
            << "  ratio " << (initial > 0 ? res.final_loss / initial : 0.0) << '\n';
  return 0;
}

int run_init(const std::string& config_path, const std::string& weights_path) {
  const TrainConfig cfg = load_train_config(config_path);
  save_weights(DmffWeights<float>::init(cfg.dmff, cfg.data.height, cfg.data.width, cfg.data.channels, cfg.seed),
               weights_path);
  return 0;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

int run_audit(std::int64_t t, std::int64_t c, std::int64_t h, bool csv) {
  if (t < 1 || c < 1 || h < 1) throw ConfigError("audit: --t, --c and --h must be >= 1");
  const auto rows = audit_rows(t, c, h);
  if (csv) {
    std::cout << "variant,term,expression,value\n";
    for (const auto& r : rows) {
      std::cout << r.variant << ',' << csv_field(r.term) << ',' << csv_field(r.expression) << ',' << r.value << '\n';
    }
  } else {
    std::cout << "T=" << t << " C=" << c << " h=" << h << "\n";
    std::cout << std::left << std::setw(8) << "variant" << std::setw(24) << "term" << std::setw(28) << "expression"
              << std::right << std::setw(14) << "value" << '\n';
    for (const auto& r : rows) {
      std::cout << std::left << std::setw(8) << r.variant << std::setw(24) << r.term << std::setw(28) << r.expression
                << std::right << std::setw(14) << r.value << '\n';
    }
  }
  for (const auto& note : audit_notes()) std::cout << (csv ? "# " : "note: ") << note << '\n';
  return 0;
}

int run_gen(const std::string& spec_path, const std::string& prefix) {
  const auto spec = synthetic_spec_from_json(read_json(spec_path));
  const auto pair = gen_synthetic_pair<float>(spec);
  save_rawtensor(prefix + "_rgb.rt", pair.rgb);
  save_rawtensor(prefix + "_thermal.rt", pair.thermal);
  save_rawtensor(prefix + "_target.rt", pair.target);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-modal feature fusion toolkit"};
  app.require_subcommand(1);
  int status = 0;

  auto* fuse = app.add_subcommand("fuse", "Fuse an RGB/thermal tensor pair with stored weights");
  std::string rgb, thermal, weights, mode, out;
  std::optional<std::string> duplication;
  fuse->add_option("--rgb", rgb, "RGB feature map (rawtensor)")->required();
  fuse->add_option("--thermal", thermal, "Thermal feature map (rawtensor)")->required();
  fuse->add_option("--weights", weights, "Weight file")->required();
  fuse->add_option("--mode", mode, "Fusion mode")
      ->required()
      ->check(CLI::IsMember({"a", "b", "c", "d", "e", "f-rgb", "f-thermal"}));
  fuse->add_option("--input-duplication", duplication, "Override the stored input duplication")
      ->check(CLI::IsMember({"none", "rgb_both", "thermal_both"}));
  fuse->add_option("--out", out, "Output path (rawtensor)")->required();
  fuse->callback([&] { status = run_fuse(rgb, thermal, weights, mode, duplication, out); });

  auto* gc = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  std::string gc_config;
  double eps = 1e-5, tol = 1e-4;
  std::size_t coords = 20;
  gc->add_option("--config", gc_config, "JSON config")->required();
  gc->add_option("--eps", eps, "Finite-difference step")->capture_default_str();
  gc->add_option("--tol", tol, "Relative error tolerance")->capture_default_str();
  gc->add_option("--coords", coords, "Sampled coordinates per tensor")->capture_default_str();
  gc->callback([&] { status = run_gradcheck(gc_config, eps, tol, coords); });

  auto* train = app.add_subcommand("train-toy", "Train on the synthetic reconstruction task");
  std::string tr_config, tr_weights, tr_trace;
  std::optional<std::uint64_t> tr_seed;
  train->add_option("--config", tr_config, "JSON config")->required();
  train->add_option("--seed", tr_seed, "Override the config seed");
  train->add_option("--out-weights", tr_weights, "Weight file to write")->required();
  train->add_option("--trace", tr_trace, "CSV loss trace to write")->required();
  train->callback([&] { status = run_train(tr_config, tr_seed, tr_weights, tr_trace); });

  auto* init = app.add_subcommand("init", "Write freshly initialized weights");
  std::string in_config, in_weights;
  init->add_option("--config", in_config, "JSON config")->required();
  init->add_option("--out-weights", in_weights, "Weight file to write")->required();
  init->callback([&] { status = run_init(in_config, in_weights); });

  auto* audit = app.add_subcommand("audit", "Print the multiply-count comparison table");
  std::int64_t t = 0, c = 0, h = 0;
  bool csv = false;
  // "-h" would clash with the hidden-width option.
  audit->set_help_flag("--help", "Print this help message and exit");
  audit->add_option("--t", t, "Token count")->required();
  audit->add_option("--c", c, "Channels")->required();
  audit->add_option("--h", h, "FFN hidden width")->required();
  audit->add_flag("--csv", csv, "CSV output");
  audit->callback([&] { status = run_audit(t, c, h, csv); });

  auto* gen = app.add_subcommand("gen", "Generate a synthetic RGB/thermal/target triple");
  std::string spec, prefix;
  gen->add_option("--spec", spec, "JSON synthetic spec")->required();
  gen->add_option("--out-prefix", prefix, "Output path prefix")->required();
  gen->callback([&] { status = run_gen(spec, prefix); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return status;
}
