// funclingam command-line tool: generate / discover / evaluate / benchmark /
// diagnose over the file formats defined in the library headers.
//
// Exit codes: 0 success, 1 runtime/numerical failure, 2 usage/validation error.

#include <funclingam/funclingam.hpp>

#include <CLI11.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

namespace fl = funclingam;
namespace fs = std::filesystem;
using fl::json;

namespace {

// ---------------------------------------------------------------------------
// Config-file merge: flags override JSON config file values override defaults.

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  json cfg = fl::parse_json_file(path);
  if (!cfg.is_object()) throw fl::data_error("config file " + path + ": expected a JSON object");
  return cfg;
}

template <typename T>
void merge_option(const CLI::App& sub, const json& cfg, const std::string& flag,
                  const std::string& key, T& value) {
  if (!cfg.contains(key)) return;
  if (sub.get_option("--" + flag)->count() > 0) return;  // explicit flag wins
  try {
    value = cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw fl::data_error("config file: key '" + key + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Shared discovery options.

struct DiscoveryFlags {
  int basis_l;
  int basis_order;
  double evr;
  int m;
  std::string measure;
  double tau;
  double ridge;
  int hsic_subsample;

  DiscoveryFlags() {
    const fl::DiscoveryConfig d;
    basis_l = d.basis_dim;
    basis_order = d.basis_order;
    evr = d.evr;
    m = d.fixed_m;
    measure = d.measure;
    tau = d.tau;
    ridge = d.ridge;
    hsic_subsample = d.hsic_subsample;
  }
};

void add_discovery_flags(CLI::App* sub, DiscoveryFlags& f) {
  sub->add_option("--basis-l", f.basis_l, "Number of B-spline basis functions")
      ->capture_default_str();
  sub->add_option("--basis-order", f.basis_order, "B-spline order (degree + 1)")
      ->capture_default_str();
  sub->add_option("--evr", f.evr, "Explained-variance ratio for choosing M")
      ->capture_default_str();
  sub->add_option("--m", f.m, "Fixed number of components (0 = choose by --evr)")
      ->capture_default_str();
  sub->add_option("--measure", f.measure, "Dependence measure (hsic)")->capture_default_str();
  sub->add_option("--tau", f.tau, "Edge threshold on normalized block norms")
      ->capture_default_str();
  sub->add_option("--ridge", f.ridge, "Relative ridge for residual regressions")
      ->capture_default_str();
  sub->add_option("--hsic-subsample", f.hsic_subsample, "Subsample cap for HSIC")
      ->capture_default_str();
}

void merge_discovery_flags(const CLI::App& sub, const json& cfg, DiscoveryFlags& f) {
  merge_option(sub, cfg, "basis-l", "basis_l", f.basis_l);
  merge_option(sub, cfg, "basis-order", "basis_order", f.basis_order);
  merge_option(sub, cfg, "evr", "evr", f.evr);
  merge_option(sub, cfg, "m", "m", f.m);
  merge_option(sub, cfg, "measure", "measure", f.measure);
  merge_option(sub, cfg, "tau", "tau", f.tau);
  merge_option(sub, cfg, "ridge", "ridge", f.ridge);
  merge_option(sub, cfg, "hsic-subsample", "hsic_subsample", f.hsic_subsample);
}

fl::DiscoveryConfig to_discovery_config(const DiscoveryFlags& f, std::uint64_t seed) {
  fl::DiscoveryConfig dc;
  dc.basis_dim = f.basis_l;
  dc.basis_order = f.basis_order;
  dc.evr = f.evr;
  dc.fixed_m = f.m;
  dc.measure = f.measure;
  dc.tau = f.tau;
  dc.ridge = f.ridge;
  dc.hsic_subsample = f.hsic_subsample;
  dc.seed = seed;
  return dc;
}

json discovery_flags_json(const DiscoveryFlags& f) {
  return json{{"basis_l", f.basis_l}, {"basis_order", f.basis_order},
              {"evr", f.evr},         {"m", f.m},
              {"measure", f.measure}, {"tau", f.tau},
              {"ridge", f.ridge},     {"hsic_subsample", f.hsic_subsample}};
}

std::vector<int> parse_int_list(const std::string& text, const std::string& flag) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string_view field{text.data() + start,
                                 (comma == std::string::npos ? text.size() : comma) - start};
    int v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size())
      throw fl::invalid_argument_error(flag + ": expected a comma-separated list of integers, got '" +
                                       text + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw fl::invalid_argument_error(flag + ": empty list");
  return out;
}

void require_path(const std::string& value, const std::string& flag) {
  if (value.empty()) throw fl::invalid_argument_error(flag + " is required");
}

// ---------------------------------------------------------------------------
// Command implementations.

struct GenerateOpts {
  int n = 100, p = 5, w = 1000;
  std::uint64_t seed = 0;
  std::string law = "squared";
  std::string out, config;
};

int cmd_generate(const CLI::App& sub, GenerateOpts o) {
  const json cfg = load_config_file(o.config);
  merge_option(sub, cfg, "n", "n", o.n);
  merge_option(sub, cfg, "p", "p", o.p);
  merge_option(sub, cfg, "w", "w", o.w);
  merge_option(sub, cfg, "seed", "seed", o.seed);
  merge_option(sub, cfg, "law", "law", o.law);
  merge_option(sub, cfg, "out", "out", o.out);
  require_path(o.out, "--out");

  fl::SynthConfig sc;
  sc.n = o.n;
  sc.p = o.p;
  sc.w = o.w;
  sc.seed = o.seed;
  sc.law = fl::coefficient_law_from_string(o.law);
  fl::validate_synth_config(sc);

  const json echo{{"command", "generate"}, {"n", sc.n},
                  {"p", sc.p},             {"w", sc.w},
                  {"seed", sc.seed},       {"law", fl::to_string(sc.law)},
                  {"coef_dim", sc.coef_dim}, {"noise_sd", sc.noise_sd},
                  {"out", o.out}};
  const auto [panel, truth] = fl::generate(sc);
  fl::write_panel(o.out, panel, echo);
  fl::write_truth(fs::path(o.out) / "truth.json", truth, panel.variable_names, echo);
  return 0;
}

struct DiscoverOpts {
  std::string in, out, config;
  std::uint64_t seed = 0;
  DiscoveryFlags flags;
};

int cmd_discover(const CLI::App& sub, DiscoverOpts o) {
  const json cfg = load_config_file(o.config);
  merge_option(sub, cfg, "in", "in", o.in);
  merge_option(sub, cfg, "out", "out", o.out);
  merge_option(sub, cfg, "seed", "seed", o.seed);
  merge_discovery_flags(sub, cfg, o.flags);
  require_path(o.in, "--in");
  require_path(o.out, "--out");

  const fl::CurvePanel panel = fl::read_panel(o.in);
  const fl::DiscoveryConfig dc = to_discovery_config(o.flags, o.seed);
  const fl::DiscoveryReport report = fl::discover(panel, dc);

  json echo = discovery_flags_json(o.flags);
  echo["command"] = "discover";
  echo["in"] = o.in;
  echo["out"] = o.out;
  echo["seed"] = o.seed;
  fl::write_report(o.out, report, echo);
  fl::write_fpca_model(fs::path(o.out) / "model.json", report.model, report.variable_names, echo);
  fl::write_scores_csv(fs::path(o.out) / "scores.csv", report.scores);
  return 0;
}

struct EvaluateOpts {
  std::string in, truth, out, config;
};

int cmd_evaluate(const CLI::App& sub, EvaluateOpts o) {
  const json cfg = load_config_file(o.config);
  merge_option(sub, cfg, "in", "in", o.in);
  merge_option(sub, cfg, "truth", "truth", o.truth);
  merge_option(sub, cfg, "out", "out", o.out);
  require_path(o.in, "--in");
  require_path(o.truth, "--truth");
  require_path(o.out, "--out");

  const fl::ReportFile pred = fl::read_report(o.in);
  const fl::TruthFile truth = fl::read_truth(o.truth);
  if (pred.variables != truth.variables)
    throw fl::data_error("evaluate: predicted and true variable lists differ");
  const fl::MetricsReport metrics = fl::evaluate_graphs(pred.graph, truth.graph);

  const json echo{{"command", "evaluate"}, {"in", o.in}, {"truth", o.truth}, {"out", o.out}};
  fl::write_metrics(fs::path(o.out) / "metrics.json", metrics, echo);
  return 0;
}

struct BenchmarkOpts {
  std::string ns_text = "100", ps_text = "5";
  int trials = 20, w = 1000, threads = 0;
  std::uint64_t seed = 0;
  std::string law = "squared";
  std::string out, config;
  DiscoveryFlags flags;
};

int cmd_benchmark(const CLI::App& sub, BenchmarkOpts o) {
  const json cfg = load_config_file(o.config);
  merge_option(sub, cfg, "n", "n", o.ns_text);
  merge_option(sub, cfg, "p", "p", o.ps_text);
  merge_option(sub, cfg, "trials", "trials", o.trials);
  merge_option(sub, cfg, "w", "w", o.w);
  merge_option(sub, cfg, "threads", "threads", o.threads);
  merge_option(sub, cfg, "seed", "seed", o.seed);
  merge_option(sub, cfg, "law", "law", o.law);
  merge_option(sub, cfg, "out", "out", o.out);
  merge_discovery_flags(sub, cfg, o.flags);
  require_path(o.out, "--out");

  fl::BenchmarkConfig bc;
  bc.ns = parse_int_list(o.ns_text, "--n");
  bc.ps = parse_int_list(o.ps_text, "--p");
  bc.trials = o.trials;
  bc.seed = o.seed;
  bc.w = o.w;
  bc.law = fl::coefficient_law_from_string(o.law);
  bc.discovery = to_discovery_config(o.flags, o.seed);
  bc.threads = o.threads;

  json echo = discovery_flags_json(o.flags);
  echo["command"] = "benchmark";
  echo["n"] = bc.ns;
  echo["p"] = bc.ps;
  echo["trials"] = bc.trials;
  echo["w"] = bc.w;
  echo["seed"] = bc.seed;
  echo["law"] = fl::to_string(bc.law);
  echo["threads"] = bc.threads;
  echo["out"] = o.out;

  const fl::TrialTable table = fl::benchmark(bc, [](const fl::CellStats& cell) {
    std::cerr << "cell n=" << cell.n << " p=" << cell.p << ": precision=" << cell.precision.mean
              << " recall=" << cell.recall.mean << " f1=" << cell.f1.mean
              << " shd=" << cell.shd.mean << " (" << cell.trials << " trials, " << cell.failed
              << " failed" << (cell.flagged ? ", FLAGGED" : "") << ")\n";
  });
  fl::write_trial_table(o.out, table, echo);

  for (const fl::CellStats& cell : table.cells) {
    if (cell.flagged) {
      std::cerr << "error: cell n=" << cell.n << " p=" << cell.p
                << " exceeded the 10% failure budget\n";
      return 1;
    }
  }
  return 0;
}

struct DiagnoseOpts {
  std::string in, out, config;
};

int cmd_diagnose(const CLI::App& sub, DiagnoseOpts o) {
  const json cfg = load_config_file(o.config);
  merge_option(sub, cfg, "in", "in", o.in);
  merge_option(sub, cfg, "out", "out", o.out);
  require_path(o.in, "--in");
  require_path(o.out, "--out");

  const fl::CurvePanel panel = fl::read_panel(o.in);
  const fl::GaussianityScan scan = fl::gaussianity_scan(panel);
  const json echo{{"command", "diagnose"}, {"in", o.in}, {"out", o.out}, {"alpha", 0.05}};
  fl::write_gaussianity(o.out, scan, panel.variable_names, echo, 0.05);
  return 0;
}

int run_guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const fl::invalid_argument_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fl::data_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fl::insufficient_data_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fl::error& e) {  // io, singularity, degenerate-data, numeric
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal ordering for multivariate functional data"};
  app.require_subcommand(1);

  GenerateOpts gen;
  CLI::App* gen_cmd = app.add_subcommand("generate", "Generate a synthetic curve panel");
  gen_cmd->add_option("--n", gen.n, "Samples per variable")->capture_default_str();
  gen_cmd->add_option("--p", gen.p, "Number of variables")->capture_default_str();
  gen_cmd->add_option("--w", gen.w, "Grid points per curve")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
  gen_cmd->add_option("--law", gen.law, "Coefficient law: squared|gaussian")
      ->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory");
  gen_cmd->add_option("--config", gen.config, "JSON config file (flags override)");

  DiscoverOpts dis;
  CLI::App* dis_cmd = app.add_subcommand("discover", "Estimate the causal ordering and graph");
  dis_cmd->add_option("--in", dis.in, "Input directory (panel.csv + panel.json)");
  dis_cmd->add_option("--out", dis.out, "Output directory");
  dis_cmd->add_option("--seed", dis.seed, "Seed for HSIC subsampling")->capture_default_str();
  add_discovery_flags(dis_cmd, dis.flags);
  dis_cmd->add_option("--config", dis.config, "JSON config file (flags override)");

  EvaluateOpts eva;
  CLI::App* eva_cmd = app.add_subcommand("evaluate", "Score a discovered graph against truth");
  eva_cmd->add_option("--in", eva.in, "Discovered report.json");
  eva_cmd->add_option("--truth", eva.truth, "Ground-truth truth.json");
  eva_cmd->add_option("--out", eva.out, "Output directory");
  eva_cmd->add_option("--config", eva.config, "JSON config file (flags override)");

  BenchmarkOpts ben;
  CLI::App* ben_cmd = app.add_subcommand("benchmark", "Run generate+discover trial grids");
  ben_cmd->add_option("--n", ben.ns_text, "Comma-separated sample sizes")->capture_default_str();
  ben_cmd->add_option("--p", ben.ps_text, "Comma-separated variable counts")
      ->capture_default_str();
  ben_cmd->add_option("--trials", ben.trials, "Trials per cell")->capture_default_str();
  ben_cmd->add_option("--w", ben.w, "Grid points per curve")->capture_default_str();
  ben_cmd->add_option("--seed", ben.seed, "Master seed")->capture_default_str();
  ben_cmd->add_option("--law", ben.law, "Coefficient law: squared|gaussian")
      ->capture_default_str();
  ben_cmd->add_option("--threads", ben.threads, "Worker threads (0 = auto)")
      ->capture_default_str();
  add_discovery_flags(ben_cmd, ben.flags);
  ben_cmd->add_option("--out", ben.out, "Output directory");
  ben_cmd->add_option("--config", ben.config, "JSON config file (flags override)");

  DiagnoseOpts dia;
  CLI::App* dia_cmd = app.add_subcommand("diagnose", "Pointwise marginal normality scan");
  dia_cmd->add_option("--in", dia.in, "Input directory (panel.csv + panel.json)");
  dia_cmd->add_option("--out", dia.out, "Output directory");
  dia_cmd->add_option("--config", dia.config, "JSON config file (flags override)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (gen_cmd->parsed()) return run_guarded([&] { return cmd_generate(*gen_cmd, gen); });
  if (dis_cmd->parsed()) return run_guarded([&] { return cmd_discover(*dis_cmd, dis); });
  if (eva_cmd->parsed()) return run_guarded([&] { return cmd_evaluate(*eva_cmd, eva); });
  if (ben_cmd->parsed()) return run_guarded([&] { return cmd_benchmark(*ben_cmd, ben); });
  if (dia_cmd->parsed()) return run_guarded([&] { return cmd_diagnose(*dia_cmd, dia); });
  return 2;
}
