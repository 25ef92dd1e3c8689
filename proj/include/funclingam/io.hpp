#pragma once

#include "funclingam/common.hpp"
#include "funclingam/curves.hpp"
#include "funclingam/discovery.hpp"
#include "funclingam/fpca.hpp"
#include "funclingam/graph.hpp"
#include "funclingam/metrics.hpp"
#include "funclingam/synthgen.hpp"

#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <utility>
#include <vector>

namespace funclingam {

using json = nlohmann::json;

/// Shortest round-trip decimal rendering (std::to_chars), used for every
/// floating-point value written to CSV so artifacts are byte-stable.
inline std::string format_double(double v) {
  char buf[64];
  auto result = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, result.ptr);
}

namespace detail {

inline void append_int(std::string& out, long long v) {
  char buf[24];
  auto result = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, result.ptr);
}

inline void append_double(std::string& out, double v) {
  char buf[64];
  auto result = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, result.ptr);
}

}  // namespace detail

/// Write via a temporary file in the same directory plus an atomic rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  const fs::path parent = path.parent_path();
  if (!parent.empty()) {
    fs::create_directories(parent, ec);
    if (ec) throw io_error("cannot create directory " + parent.string() + ": " + ec.message());
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw io_error("write to " + tmp.string() + " failed");
  }
  fs::rename(tmp, path, ec);
  if (ec) throw io_error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

/// Read a whole input file; a missing or unreadable input is a validation
/// failure (data_error), not an I/O failure.
inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw data_error("failed reading " + path.string());
  return content;
}

inline json parse_json_file(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw data_error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Graphs

inline json graph_adjacency_json(const BinaryGraph& g) {
  json rows = json::array();
  for (int i = 0; i < g.p; ++i) {
    json row = json::array();
    for (int j = 0; j < g.p; ++j) row.push_back(g.edge(i, j) ? 1 : 0);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline BinaryGraph graph_from_adjacency_json(const json& rows) {
  try {
    const int p = static_cast<int>(rows.size());
    require_arg(p >= 1, "adjacency: empty matrix");
    BinaryGraph g(p);
    for (int i = 0; i < p; ++i) {
      const json& row = rows.at(static_cast<std::size_t>(i));
      if (static_cast<int>(row.size()) != p) throw data_error("adjacency: ragged matrix");
      for (int j = 0; j < p; ++j) {
        const int v = row.at(static_cast<std::size_t>(j)).get<int>();
        if (v != 0 && v != 1) throw data_error("adjacency: entries must be 0 or 1");
        if (v == 1) g.set_edge(i, j, true);
      }
    }
    return g;
  } catch (const json::exception& e) {
    throw data_error(std::string("adjacency: ") + e.what());
  }
}

inline json graph_edges_json(const BinaryGraph& g, const std::vector<std::string>& names) {
  json edges = json::array();
  for (int j = 0; j < g.p; ++j)
    for (int i = 0; i < g.p; ++i)
      if (g.edge(i, j))
        edges.push_back(json{{"from", names[static_cast<std::size_t>(j)]},
                             {"to", names[static_cast<std::size_t>(i)]}});
  return edges;
}

inline std::string graph_to_dot(const BinaryGraph& g, const std::vector<std::string>& names) {
  require_arg(static_cast<int>(names.size()) == g.p, "graph_to_dot: one name per variable");
  std::string dot = "digraph {\n";
  for (const std::string& name : names) dot += "  " + name + ";\n";
  for (int j = 0; j < g.p; ++j)
    for (int i = 0; i < g.p; ++i)
      if (g.edge(i, j))
        dot += "  " + names[static_cast<std::size_t>(j)] + " -> " +
               names[static_cast<std::size_t>(i)] + ";\n";
  dot += "}\n";
  return dot;
}

// ---------------------------------------------------------------------------
// Curve panels: long-format CSV plus a JSON sidecar.

inline void write_panel(const std::filesystem::path& dir, const CurvePanel& panel,
                        const json& config_echo) {
  const int n = panel.n(), p = panel.p(), w = panel.w();
  std::string csv;
  csv.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(p) *
                  static_cast<std::size_t>(w) * 28 +
              64);
  csv += "sample_id,variable_id,time_index,value\n";
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      const Matrix& values = panel.values[static_cast<std::size_t>(j)];
      const std::string& name = panel.variable_names[static_cast<std::size_t>(j)];
      for (int k = 0; k < w; ++k) {
        detail::append_int(csv, i);
        csv += ',';
        csv += name;
        csv += ',';
        detail::append_int(csv, k);
        csv += ',';
        detail::append_double(csv, values(i, k));
        csv += '\n';
      }
    }
  }
  write_file_atomic(dir / "panel.csv", csv);

  json sidecar{{"n", n},
               {"p", p},
               {"w", w},
               {"grid", panel.grid.points},
               {"variables", panel.variable_names},
               {"config", config_echo}};
  write_file_atomic(dir / "panel.json", dump_json(sidecar));
}

inline CurvePanel read_panel(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path csv_path = dir / "panel.csv";
  const fs::path sidecar_path = dir / "panel.json";
  const json sidecar = parse_json_file(sidecar_path);

  int n = 0, p = 0, w = 0;
  TimeGrid grid;
  std::vector<std::string> names;
  try {
    n = sidecar.at("n").get<int>();
    p = sidecar.at("p").get<int>();
    w = sidecar.at("w").get<int>();
    grid.points = sidecar.at("grid").get<std::vector<double>>();
    names = sidecar.at("variables").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw data_error("panel sidecar " + sidecar_path.string() + ": " + e.what());
  }
  if (n < 2 || p < 2 || w < 2) throw data_error("panel sidecar: invalid n/p/w");
  if (static_cast<int>(grid.points.size()) != w)
    throw data_error("panel sidecar: grid length does not match w");
  if (static_cast<int>(names.size()) != p)
    throw data_error("panel sidecar: variable list does not match p");
  validate_time_grid(grid);

  std::unordered_map<std::string, int> name_index;
  for (int j = 0; j < p; ++j) {
    if (!name_index.emplace(names[static_cast<std::size_t>(j)], j).second)
      throw data_error("panel sidecar: duplicate variable name");
  }

  const std::string text = read_text(csv_path);
  std::string_view rest(text);
  auto next_line = [&rest]() -> std::string_view {
    if (rest.empty()) return {};
    const std::size_t eol = rest.find('\n');
    std::string_view line = eol == std::string_view::npos ? rest : rest.substr(0, eol);
    rest = eol == std::string_view::npos ? std::string_view{} : rest.substr(eol + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
  };

  const std::string_view header = next_line();
  if (header != "sample_id,variable_id,time_index,value")
    throw data_error("panel CSV: unexpected header");

  std::vector<Matrix> values(static_cast<std::size_t>(p),
                             Matrix::Zero(n, w));
  std::vector<bool> seen(static_cast<std::size_t>(n) * static_cast<std::size_t>(p) *
                             static_cast<std::size_t>(w),
                         false);
  std::size_t rows = 0;
  auto parse_int = [](std::string_view field, const char* what) -> long long {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size())
      throw data_error(std::string("panel CSV: bad ") + what);
    return v;
  };
  while (true) {
    const std::string_view line = next_line();
    if (line.empty()) {
      if (rest.empty()) break;
      throw data_error("panel CSV: blank line");
    }
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
    const std::size_t c3 = c2 == std::string_view::npos ? c2 : line.find(',', c2 + 1);
    if (c3 == std::string_view::npos) throw data_error("panel CSV: expected 4 fields per row");
    const long long i = parse_int(line.substr(0, c1), "sample_id");
    const std::string name(line.substr(c1 + 1, c2 - c1 - 1));
    const long long k = parse_int(line.substr(c2 + 1, c3 - c2 - 1), "time_index");
    const std::string_view value_field = line.substr(c3 + 1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(value_field.data(), value_field.data() + value_field.size(), value);
    if (ec != std::errc{} || ptr != value_field.data() + value_field.size())
      throw data_error("panel CSV: bad value field");
    const auto found = name_index.find(name);
    if (found == name_index.end()) throw data_error("panel CSV: unknown variable '" + name + "'");
    if (i < 0 || i >= n) throw data_error("panel CSV: sample_id out of range");
    if (k < 0 || k >= w) throw data_error("panel CSV: time_index out of range");
    const int j = found->second;
    const std::size_t flat =
        (static_cast<std::size_t>(i) * static_cast<std::size_t>(p) + static_cast<std::size_t>(j)) *
            static_cast<std::size_t>(w) +
        static_cast<std::size_t>(k);
    if (seen[flat]) throw data_error("panel CSV: duplicate cell");
    seen[flat] = true;
    values[static_cast<std::size_t>(j)](static_cast<Index>(i), static_cast<Index>(k)) = value;
    ++rows;
  }
  if (rows != seen.size()) throw data_error("panel CSV: missing cells");
  try {
    return make_curve_panel(std::move(grid), std::move(names), std::move(values));
  } catch (const error& e) {
    throw data_error(std::string("panel validation: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Ground truth

struct TruthFile {
  BinaryGraph graph;
  CausalOrder order;
  std::string block_law;
  std::vector<std::string> variables;
};

inline void write_truth(const std::filesystem::path& path, const GroundTruth& truth,
                        const std::vector<std::string>& variables, const json& config_echo) {
  json j{{"config", config_echo},
         {"variables", variables},
         {"order", truth.order.order},
         {"block_law", truth.block_law},
         {"adjacency", graph_adjacency_json(truth.graph)},
         {"edges", graph_edges_json(truth.graph, variables)}};
  write_file_atomic(path, dump_json(j));
}

inline TruthFile read_truth(const std::filesystem::path& path) {
  const json j = parse_json_file(path);
  TruthFile out;
  try {
    out.graph = graph_from_adjacency_json(j.at("adjacency"));
    out.variables = j.at("variables").get<std::vector<std::string>>();
    out.order.order = j.at("order").get<std::vector<int>>();
    out.block_law = j.value("block_law", std::string{});
  } catch (const json::exception& e) {
    throw data_error("truth file " + path.string() + ": " + e.what());
  }
  if (static_cast<int>(out.variables.size()) != out.graph.p)
    throw data_error("truth file: variable list does not match adjacency size");
  if (!is_valid_order(out.order, out.graph.p))
    throw data_error("truth file: order is not a permutation");
  return out;
}

// ---------------------------------------------------------------------------
// FPCA model and scores

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& rows) {
  try {
    const Index r = static_cast<Index>(rows.size());
    require_arg(r >= 1, "matrix: empty");
    const Index c = static_cast<Index>(rows.at(0).size());
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i) {
      const json& row = rows.at(static_cast<std::size_t>(i));
      if (static_cast<Index>(row.size()) != c) throw data_error("matrix: ragged rows");
      for (Index j = 0; j < c; ++j) m(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
    }
    return m;
  } catch (const json::exception& e) {
    throw data_error(std::string("matrix: ") + e.what());
  }
}

inline void write_fpca_model(const std::filesystem::path& path, const FpcaModel& model,
                             const std::vector<std::string>& variables, const json& config_echo) {
  require_arg(static_cast<bool>(model.basis), "write_fpca_model: model has no basis");
  const BasisSystem& basis = *model.basis;
  json basis_json{{"kind", basis.kind == BasisKind::bspline ? "bspline" : "fourier"},
                  {"l", basis.l},
                  {"order", basis.order},
                  {"harmonics", basis.harmonics},
                  {"grid", basis.grid.points}};
  json vars = json::array();
  for (std::size_t j = 0; j < model.variables.size(); ++j) {
    const VariableFpca& var = model.variables[j];
    vars.push_back(json{{"name", variables.at(j)},
                        {"mean", std::vector<double>(var.mean_coef.data(),
                                                     var.mean_coef.data() + var.mean_coef.size())},
                        {"eigenvalues",
                         std::vector<double>(var.eigenvalues.data(),
                                             var.eigenvalues.data() + var.eigenvalues.size())},
                        {"loadings", matrix_to_json(var.loadings)}});
  }
  json j{{"config", config_echo}, {"basis", basis_json}, {"variables", vars}};
  write_file_atomic(path, dump_json(j));
}

inline FpcaModel read_fpca_model(const std::filesystem::path& path) {
  const json j = parse_json_file(path);
  FpcaModel model;
  try {
    const json& basis_json = j.at("basis");
    TimeGrid grid;
    grid.points = basis_json.at("grid").get<std::vector<double>>();
    const std::string kind = basis_json.at("kind").get<std::string>();
    BasisSystem basis;
    if (kind == "bspline")
      basis = bspline_basis(grid, basis_json.at("l").get<int>(), basis_json.at("order").get<int>());
    else if (kind == "fourier")
      basis = fourier_basis(grid, basis_json.at("harmonics").get<int>());
    else
      throw data_error("model file: unknown basis kind '" + kind + "'");
    model.basis = std::make_shared<const BasisSystem>(std::move(basis));
    model.gram = model.basis->gram;
    model.l = model.basis->l;
    for (const json& var_json : j.at("variables")) {
      VariableFpca var;
      const std::vector<double> mean = var_json.at("mean").get<std::vector<double>>();
      const std::vector<double> eigs = var_json.at("eigenvalues").get<std::vector<double>>();
      var.mean_coef = Eigen::Map<const Vector>(mean.data(), static_cast<Index>(mean.size()));
      var.eigenvalues = Eigen::Map<const Vector>(eigs.data(), static_cast<Index>(eigs.size()));
      var.loadings = matrix_from_json(var_json.at("loadings"));
      if (var.mean_coef.size() != model.l || var.eigenvalues.size() != model.l ||
          var.loadings.rows() != model.l || var.loadings.cols() != model.l)
        throw data_error("model file: inconsistent dimensions");
      model.variables.push_back(std::move(var));
    }
  } catch (const json::exception& e) {
    throw data_error("model file " + path.string() + ": " + e.what());
  }
  return model;
}

inline void write_scores_csv(const std::filesystem::path& path, const ScorePanel& scores) {
  std::string csv = "sample_id,variable_id,component,score\n";
  const int n = scores.n();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < scores.p(); ++j) {
      const std::string& name = scores.variable_names[static_cast<std::size_t>(j)];
      for (int m = 0; m < scores.m; ++m) {
        detail::append_int(csv, i);
        csv += ',';
        csv += name;
        csv += ',';
        detail::append_int(csv, m);
        csv += ',';
        detail::append_double(csv, scores.scores[static_cast<std::size_t>(j)](i, m));
        csv += '\n';
      }
    }
  }
  write_file_atomic(path, csv);
}

// ---------------------------------------------------------------------------
// Discovery report

inline json report_to_json(const DiscoveryReport& report, const json& config_echo) {
  json stages = json::array();
  for (const StageRecord& stage : report.stages) {
    stages.push_back(json{{"stage", stage.stage},
                          {"candidates", stage.candidates},
                          {"scores", stage.scores},
                          {"chosen", stage.chosen}});
  }
  json block_rows = json::array();
  for (int i = 0; i < report.blocks.p; ++i)
    for (int j = 0; j < report.blocks.p; ++j) {
      // Only blocks strictly below the discovered order are estimated.
      if (report.block_norms(i, j) != 0.0)
        block_rows.push_back(
            json{{"i", i}, {"j", j}, {"matrix", matrix_to_json(report.blocks.block(i, j))}});
    }
  std::vector<std::string> order_names;
  for (int v : report.order.order)
    order_names.push_back(report.variable_names[static_cast<std::size_t>(v)]);

  json norms = json::array();
  for (int i = 0; i < report.block_norms.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < report.block_norms.cols(); ++j) row.push_back(report.block_norms(i, j));
    norms.push_back(std::move(row));
  }

  return json{{"config", config_echo},
              {"m", report.m},
              {"variables", report.variable_names},
              {"order", report.order.order},
              {"order_names", order_names},
              {"stages", stages},
              {"block_norms", norms},
              {"blocks", block_rows},
              {"adjacency", graph_adjacency_json(report.graph)},
              {"edges", graph_edges_json(report.graph, report.variable_names)}};
}

inline void write_report(const std::filesystem::path& dir, const DiscoveryReport& report,
                         const json& config_echo) {
  write_file_atomic(dir / "report.json", dump_json(report_to_json(report, config_echo)));
  write_file_atomic(dir / "graph.dot", graph_to_dot(report.graph, report.variable_names));
}

struct ReportFile {
  BinaryGraph graph;
  CausalOrder order;
  std::vector<std::string> variables;
};

inline ReportFile read_report(const std::filesystem::path& path) {
  const json j = parse_json_file(path);
  ReportFile out;
  try {
    out.graph = graph_from_adjacency_json(j.at("adjacency"));
    out.variables = j.at("variables").get<std::vector<std::string>>();
    out.order.order = j.at("order").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw data_error("report file " + path.string() + ": " + e.what());
  }
  if (static_cast<int>(out.variables.size()) != out.graph.p)
    throw data_error("report file: variable list does not match adjacency size");
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

inline void write_metrics(const std::filesystem::path& path, const MetricsReport& metrics,
                          const json& config_echo) {
  json j{{"config", config_echo}, {"precision", metrics.precision}, {"recall", metrics.recall},
         {"f1", metrics.f1},     {"tp", metrics.tp},               {"fp", metrics.fp},
         {"fn", metrics.fn}};
  if (metrics.shd.has_value()) j["shd"] = *metrics.shd;
  write_file_atomic(path, dump_json(j));
}

// ---------------------------------------------------------------------------
// Benchmark tables

inline void write_trial_table(const std::filesystem::path& dir, const TrialTable& table,
                              const json& config_echo) {
  std::string csv = "n,p,metric,mean,sd,trials\n";
  auto row = [&csv](int n, int p, const char* metric, const MetricStat& stat, int trials) {
    detail::append_int(csv, n);
    csv += ',';
    detail::append_int(csv, p);
    csv += ',';
    csv += metric;
    csv += ',';
    detail::append_double(csv, stat.mean);
    csv += ',';
    detail::append_double(csv, stat.sd);
    csv += ',';
    detail::append_int(csv, trials);
    csv += '\n';
  };
  json cells = json::array();
  for (const CellStats& cell : table.cells) {
    row(cell.n, cell.p, "precision", cell.precision, cell.trials);
    row(cell.n, cell.p, "recall", cell.recall, cell.trials);
    row(cell.n, cell.p, "f1", cell.f1, cell.trials);
    row(cell.n, cell.p, "shd", cell.shd, cell.trials);
    auto stat_json = [](const MetricStat& s) { return json{{"mean", s.mean}, {"sd", s.sd}}; };
    cells.push_back(json{{"n", cell.n},
                         {"p", cell.p},
                         {"trials", cell.trials},
                         {"failed", cell.failed},
                         {"flagged", cell.flagged},
                         {"master_seed", cell.master_seed},
                         {"trial_seeds", cell.trial_seeds},
                         {"precision", stat_json(cell.precision)},
                         {"recall", stat_json(cell.recall)},
                         {"f1", stat_json(cell.f1)},
                         {"shd", stat_json(cell.shd)},
                         {"failures", cell.failures}});
  }
  write_file_atomic(dir / "table.csv", csv);
  write_file_atomic(dir / "table.json", dump_json(json{{"config", config_echo}, {"cells", cells}}));
}

// ---------------------------------------------------------------------------
// Gaussianity scan

inline void write_gaussianity(const std::filesystem::path& dir, const GaussianityScan& scan,
                              const std::vector<std::string>& variables, const json& config_echo,
                              double alpha = 0.05) {
  require_arg(static_cast<int>(variables.size()) == scan.p,
              "write_gaussianity: one name per variable");
  std::string csv = "variable_id";
  for (int k = 0; k < scan.w; ++k) {
    csv += ",t";
    detail::append_int(csv, k);
  }
  csv += '\n';
  for (int j = 0; j < scan.p; ++j) {
    csv += variables[static_cast<std::size_t>(j)];
    for (int k = 0; k < scan.w; ++k) {
      csv += ',';
      detail::append_double(csv, scan.pvalues(j, k));
    }
    csv += '\n';
  }
  json degenerate_cells = json::array();
  for (int j = 0; j < scan.p; ++j)
    for (int k = 0; k < scan.w; ++k)
      if (scan.is_degenerate(j, k)) degenerate_cells.push_back(json::array({j, k}));
  json summary{{"config", config_echo},
               {"alpha", alpha},
               {"rejection_fraction", rejection_fraction(scan, alpha)},
               {"degenerate_count", degenerate_cells.size()},
               {"degenerate_cells", degenerate_cells}};
  write_file_atomic(dir / "gaussianity.csv", csv);
  write_file_atomic(dir / "gaussianity_summary.json", dump_json(summary));
}

}  // namespace funclingam
