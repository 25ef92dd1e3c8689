#pragma once

#include "funclingam/common.hpp"
#include "funclingam/discovery.hpp"
#include "funclingam/graph.hpp"
#include "funclingam/synthgen.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace funclingam {

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  std::optional<long long> shd;  // filled by evaluate_graphs, not by confusion
};

/// Directed-edge confusion counts. A reversed edge counts as one false
/// positive plus one false negative. Precision with zero predicted edges is
/// defined as 0 (not NaN) for aggregation stability; recall likewise.
inline MetricsReport confusion(const BinaryGraph& pred, const BinaryGraph& truth) {
  require_arg(pred.p == truth.p, "confusion: graphs must have the same number of variables");
  require_arg(is_acyclic(truth), "confusion: truth graph must be acyclic");
  MetricsReport report;
  for (int i = 0; i < pred.p; ++i) {
    for (int j = 0; j < pred.p; ++j) {
      if (i == j) continue;
      const bool in_pred = pred.edge(i, j);
      const bool in_truth = truth.edge(i, j);
      report.tp += (in_pred && in_truth);
      report.fp += (in_pred && !in_truth);
      report.fn += (!in_pred && in_truth);
    }
  }
  report.precision =
      report.tp + report.fp > 0 ? static_cast<double>(report.tp) / (report.tp + report.fp) : 0.0;
  report.recall =
      report.tp + report.fn > 0 ? static_cast<double>(report.tp) / (report.tp + report.fn) : 0.0;
  const double pr = report.precision + report.recall;
  report.f1 = pr > 0.0 ? 2.0 * report.precision * report.recall / pr : 0.0;
  return report;
}

namespace detail {

/// State of an unordered pair {i, j}: bit 0 set = edge i -> j, bit 1 set =
/// edge j -> i (i < j assumed by the caller).
inline int pair_state(const BinaryGraph& g, int i, int j) {
  return (g.edge(j, i) ? 1 : 0) | (g.edge(i, j) ? 2 : 0);
}

}  // namespace detail

/// Structural Hamming distance: the minimum number of edge insertions,
/// deletions, and single-edge reversals transforming one graph into the
/// other. Decomposes over unordered pairs; a reversal costs 1.
inline long long shd(const BinaryGraph& pred, const BinaryGraph& truth) {
  require_arg(pred.p == truth.p, "shd: graphs must have the same number of variables");
  // cost[a][b]: edits between pair states {none, ->, <-, both}.
  static constexpr int cost[4][4] = {
      {0, 1, 1, 2},
      {1, 0, 1, 1},
      {1, 1, 0, 1},
      {2, 1, 1, 0},
  };
  long long total = 0;
  for (int i = 0; i < pred.p; ++i)
    for (int j = i + 1; j < pred.p; ++j)
      total += cost[detail::pair_state(pred, i, j)][detail::pair_state(truth, i, j)];
  return total;
}

inline MetricsReport evaluate_graphs(const BinaryGraph& pred, const BinaryGraph& truth) {
  MetricsReport report = confusion(pred, truth);
  report.shd = shd(pred, truth);
  return report;
}

struct NormalityTest {
  double statistic = 0.0;
  double pvalue = 0.0;
  bool degenerate = false;
};

/// Jarque-Bera omnibus normality statistic n (S^2/6 + (K-3)^2/24) with its
/// chi-squared(2) p-value exp(-JB/2). Constant columns are flagged degenerate
/// with p-value 0.
inline NormalityTest jarque_bera(const Eigen::Ref<const Vector>& column) {
  const Index n = column.size();
  if (n < 4) throw insufficient_data_error("jarque_bera: need n >= 4");
  const double mean = column.mean();
  Vector centered = column.array() - mean;
  const double m2 = centered.squaredNorm() / static_cast<double>(n);
  const double sd = std::sqrt(m2);
  NormalityTest out;
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
    out.degenerate = true;
    out.pvalue = 0.0;
    return out;
  }
  const double m3 = centered.array().cube().mean();
  const double m4 = centered.array().square().square().mean();
  const double skew = m3 / (m2 * sd);
  const double kurt = m4 / (m2 * m2);
  out.statistic =
      static_cast<double>(n) * (skew * skew / 6.0 + (kurt - 3.0) * (kurt - 3.0) / 24.0);
  out.pvalue = std::exp(-0.5 * out.statistic);
  return out;
}

struct GaussianityScan {
  Matrix pvalues;                        // p x W
  std::vector<std::uint8_t> degenerate;  // row-major p x W flags
  int p = 0;
  int w = 0;

  bool is_degenerate(int j, int k) const {
    return degenerate[static_cast<std::size_t>(j) * static_cast<std::size_t>(w) +
                      static_cast<std::size_t>(k)] != 0;
  }
};

/// Marginal normality p-values for every (variable, time point) column.
inline GaussianityScan gaussianity_scan(const CurvePanel& panel) {
  if (panel.n() < 20)
    throw insufficient_data_error("gaussianity_scan: need n >= 20");
  GaussianityScan scan;
  scan.p = panel.p();
  scan.w = panel.w();
  scan.pvalues = Matrix::Zero(scan.p, scan.w);
  scan.degenerate.assign(static_cast<std::size_t>(scan.p) * static_cast<std::size_t>(scan.w), 0);
  for (int j = 0; j < scan.p; ++j) {
    const Matrix& v = panel.values[static_cast<std::size_t>(j)];
    for (int k = 0; k < scan.w; ++k) {
      NormalityTest t = jarque_bera(v.col(k));
      scan.pvalues(j, k) = t.pvalue;
      if (t.degenerate)
        scan.degenerate[static_cast<std::size_t>(j) * static_cast<std::size_t>(scan.w) +
                        static_cast<std::size_t>(k)] = 1;
    }
  }
  return scan;
}

/// Fraction of columns rejected at `alpha` (degenerate columns carry p = 0
/// and therefore count as rejections).
inline double rejection_fraction(const GaussianityScan& scan, double alpha = 0.05) {
  require_arg(alpha > 0.0 && alpha < 1.0, "rejection_fraction: alpha must lie in (0, 1)");
  long long rejected = 0;
  const long long total = static_cast<long long>(scan.p) * scan.w;
  for (int j = 0; j < scan.p; ++j)
    for (int k = 0; k < scan.w; ++k) rejected += (scan.pvalues(j, k) <= alpha);
  return total > 0 ? static_cast<double>(rejected) / static_cast<double>(total) : 0.0;
}

struct TrialResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double shd = 0.0;
  bool failed = false;
  std::string error;
};

struct MetricStat {
  double mean = 0.0;
  double sd = 0.0;
};

struct CellStats {
  int n = 0;
  int p = 0;
  int trials = 0;  // requested trials
  int failed = 0;
  bool flagged = false;  // more than 10% of trials failed
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> trial_seeds;
  MetricStat precision, recall, f1, shd;
  std::vector<std::string> failures;
};

struct BenchmarkConfig {
  std::vector<int> ns = {100};
  std::vector<int> ps = {5};
  int trials = 20;
  std::uint64_t seed = 0;
  int w = 1000;
  CoefficientLaw law = CoefficientLaw::squared_gaussian;
  DiscoveryConfig discovery;
  int threads = 0;  // 0 = hardware concurrency; always capped by FUNC_LINGAM_THREADS
};

struct TrialTable {
  std::vector<CellStats> cells;
  BenchmarkConfig config;
};

namespace detail {

inline MetricStat mean_sd(const std::vector<double>& xs) {
  MetricStat stat;
  if (xs.empty()) return stat;
  double sum = 0.0;
  for (double x : xs) sum += x;
  stat.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - stat.mean) * (x - stat.mean);
    stat.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return stat;
}

inline int env_thread_cap() {
  const char* raw = std::getenv("FUNC_LINGAM_THREADS");
  if (raw == nullptr) return 0;
  char* end = nullptr;
  const long v = std::strtol(raw, &end, 10);
  if (end == raw || *end != '\0' || v < 1) return 0;  // unparseable values are ignored
  return static_cast<int>(v);
}

inline int resolve_threads(int requested, int trials) {
  int threads = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  const int cap = env_thread_cap();
  if (cap > 0 && threads > cap) threads = cap;
  if (threads > trials) threads = trials;
  return threads;
}

}  // namespace detail

/// Deterministic aggregation of one cell's trial slots (serial, in trial
/// order): means and sample standard deviations over the successful trials.
inline CellStats aggregate_cell(int n, int p, std::uint64_t master_seed,
                                const std::vector<TrialResult>& results) {
  CellStats cell;
  cell.n = n;
  cell.p = p;
  cell.trials = static_cast<int>(results.size());
  cell.master_seed = master_seed;
  std::vector<double> precision, recall, f1, shd_values;
  for (std::size_t t = 0; t < results.size(); ++t) {
    cell.trial_seeds.push_back(master_seed + static_cast<std::uint64_t>(t));
    const TrialResult& r = results[t];
    if (r.failed) {
      ++cell.failed;
      cell.failures.push_back("trial " + std::to_string(t) + ": " + r.error);
      continue;
    }
    precision.push_back(r.precision);
    recall.push_back(r.recall);
    f1.push_back(r.f1);
    shd_values.push_back(r.shd);
  }
  cell.precision = detail::mean_sd(precision);
  cell.recall = detail::mean_sd(recall);
  cell.f1 = detail::mean_sd(f1);
  cell.shd = detail::mean_sd(shd_values);
  cell.flagged = cell.failed * 10 > cell.trials;
  return cell;
}

using ProgressFn = std::function<void(const CellStats&)>;

/// Run generate -> discover -> score for every (n, p) cell and trial. Trial t
/// of every cell uses seed master + t and writes into its own result slot, so
/// the table is identical whether trials run serially or on the thread pool
/// (pool size: `threads`, or hardware concurrency when 0, capped by the
/// FUNC_LINGAM_THREADS environment variable and the trial count). Per-trial
/// failures are recorded in the cell, not rethrown; a cell is flagged when
/// more than 10% of its trials fail.
inline TrialTable benchmark(const BenchmarkConfig& config, const ProgressFn& progress = {}) {
  require_arg(config.trials >= 1, "benchmark: trials must be >= 1");
  require_arg(!config.ns.empty() && !config.ps.empty(), "benchmark: empty (n, p) grid");
  for (int n : config.ns) require_arg(n >= 2, "benchmark: every n must be >= 2");
  for (int p : config.ps) require_arg(p >= 2, "benchmark: every p must be >= 2");

  TrialTable table;
  table.config = config;
  const int threads = detail::resolve_threads(config.threads, config.trials);

  for (int n : config.ns) {
    for (int p : config.ps) {
      std::vector<TrialResult> results(static_cast<std::size_t>(config.trials));
      auto run_trial = [&](int t) {
        TrialResult& slot = results[static_cast<std::size_t>(t)];
        const std::uint64_t trial_seed = config.seed + static_cast<std::uint64_t>(t);
        try {
          SynthConfig synth;
          synth.n = n;
          synth.p = p;
          synth.w = config.w;
          synth.seed = trial_seed;
          synth.law = config.law;
          auto [panel, truth] = generate(synth);
          DiscoveryConfig dc = config.discovery;
          dc.seed = trial_seed;
          DiscoveryReport report = discover(panel, dc);
          MetricsReport metrics = evaluate_graphs(report.graph, truth.graph);
          slot.precision = metrics.precision;
          slot.recall = metrics.recall;
          slot.f1 = metrics.f1;
          slot.shd = static_cast<double>(*metrics.shd);
        } catch (const std::exception& e) {
          slot.failed = true;
          slot.error = e.what();
        }
      };
      if (threads <= 1) {
        for (int t = 0; t < config.trials; ++t) run_trial(t);
      } else {
        std::atomic<int> next{0};
        auto worker = [&] {
          for (int t = next.fetch_add(1); t < config.trials; t = next.fetch_add(1)) run_trial(t);
        };
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
      }
      CellStats cell = aggregate_cell(n, p, config.seed, results);
      if (progress) progress(cell);
      table.cells.push_back(std::move(cell));
    }
  }
  return table;
}

}  // namespace funclingam
