#include "oracles.hpp"

#include <funclingam/funclingam.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fl = funclingam;
namespace fs = std::filesystem;
using fl::Matrix;
using fl::Vector;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "funclingam-tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string command = std::string(FUNC_LINGAM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

fl::CurvePanel small_panel(int n, int p, int w, std::uint64_t seed) {
  fl::SynthConfig config;
  config.n = n;
  config.p = p;
  config.w = w;
  config.seed = seed;
  return fl::generate(config).first;
}

void replace_once(std::string& text, const std::string& from, const std::string& to) {
  const std::size_t at = text.find(from);
  REQUIRE(at != std::string::npos);
  text.replace(at, from.size(), to);
}

}  // namespace

TEST_CASE("format_double round-trips exactly and keeps integers short") {
  const std::vector<double> values{0.1,   1.0 / 3.0, 1e-300, 2.5e17, -1.25,
                                   0.0,   12345.6789, 5e-324, 1.0,    -0.0};
  for (double v : values) {
    const std::string s = fl::format_double(v);
    REQUIRE(std::strtod(s.c_str(), nullptr) == v);
  }
  REQUIRE(fl::format_double(1.0) == "1");
  REQUIRE(fl::format_double(0.5) == "0.5");
}

TEST_CASE("write_file_atomic leaves no temporaries and creates parents") {
  const fs::path dir = fresh_dir("atomic");
  const fs::path nested = dir / "a" / "b" / "out.txt";
  fl::write_file_atomic(nested, "hello\n");
  REQUIRE(fl::read_text(nested) == "hello\n");
  fl::write_file_atomic(nested, "replaced\n");  // atomic overwrite
  REQUIRE(fl::read_text(nested) == "replaced\n");
  int entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(nested.parent_path())) ++entries;
  REQUIRE(entries == 1);  // no .tmp files left behind

  REQUIRE_THROWS_AS(fl::read_text(dir / "absent.txt"), fl::data_error);
}

TEST_CASE("parse_json_file reports malformed input as a data problem") {
  const fs::path dir = fresh_dir("json");
  fl::write_file_atomic(dir / "good.json", "{\"k\": 3}\n");
  REQUIRE(fl::parse_json_file(dir / "good.json").at("k").get<int>() == 3);
  fl::write_file_atomic(dir / "bad.json", "{\"k\": \n");
  REQUIRE_THROWS_AS(fl::parse_json_file(dir / "bad.json"), fl::data_error);
  REQUIRE_THROWS_AS(fl::parse_json_file(dir / "missing.json"), fl::data_error);
}

TEST_CASE("adjacency and matrix JSON round-trips are exact") {
  const fl::BinaryGraph g = fl::chain_graph(4);
  REQUIRE(fl::graph_from_adjacency_json(fl::graph_adjacency_json(g)) == g);

  REQUIRE_THROWS_AS(fl::graph_from_adjacency_json(fl::json::parse("[[0,1],[0]]")), fl::data_error);
  REQUIRE_THROWS_AS(fl::graph_from_adjacency_json(fl::json::parse("[[0,2],[0,0]]")),
                    fl::data_error);
  REQUIRE_THROWS_AS(fl::graph_from_adjacency_json(fl::json::parse("[[\"x\",0],[0,0]]")),
                    fl::data_error);

  Matrix m(2, 3);
  m << 0.1, -1.0 / 3.0, 1e-15, 2.5e8, 0.0, -7.25;
  const Matrix back = fl::matrix_from_json(fl::matrix_to_json(m));
  REQUIRE((back - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("graph_to_dot emits one node and one edge line each") {
  const std::string dot = fl::graph_to_dot(fl::chain_graph(2), {"f1", "f2"});
  REQUIRE(dot == "digraph {\n  f1;\n  f2;\n  f1 -> f2;\n}\n");
  REQUIRE_THROWS_AS(fl::graph_to_dot(fl::chain_graph(2), {"f1"}), fl::invalid_argument_error);
}

TEST_CASE("curve panels round-trip through CSV exactly") {
  const fs::path dir = fresh_dir("panel-roundtrip");
  const fl::CurvePanel panel = small_panel(7, 3, 11, 17);
  fl::write_panel(dir, panel, fl::json{{"command", "test"}});
  const fl::CurvePanel back = fl::read_panel(dir);
  REQUIRE(back.n() == 7);
  REQUIRE(back.p() == 3);
  REQUIRE(back.w() == 11);
  REQUIRE(back.variable_names == panel.variable_names);
  REQUIRE(back.grid.points == panel.grid.points);
  for (int j = 0; j < 3; ++j)
    REQUIRE((back.values[static_cast<std::size_t>(j)] - panel.values[static_cast<std::size_t>(j)])
                .cwiseAbs()
                .maxCoeff() == 0.0);

  const fl::json sidecar = fl::parse_json_file(dir / "panel.json");
  REQUIRE(sidecar.at("n").get<int>() == 7);
  REQUIRE(sidecar.at("config").at("command").get<std::string>() == "test");
}

TEST_CASE("read_panel rejects corrupted inputs as data problems") {
  const fs::path dir = fresh_dir("panel-corrupt");
  const fl::CurvePanel panel = small_panel(4, 2, 10, 23);
  fl::write_panel(dir, panel, fl::json::object());
  const std::string csv = fl::read_text(dir / "panel.csv");
  const std::string sidecar = fl::read_text(dir / "panel.json");

  auto restore = [&] {
    fl::write_file_atomic(dir / "panel.csv", csv);
    fl::write_file_atomic(dir / "panel.json", sidecar);
  };

  // Missing sidecar.
  fs::remove(dir / "panel.json");
  REQUIRE_THROWS_AS(fl::read_panel(dir), fl::data_error);
  restore();

  // Truncated data: drop the final line.
  std::string truncated = csv;
  truncated.erase(truncated.find_last_of('\n', truncated.size() - 2) + 1);
  fl::write_file_atomic(dir / "panel.csv", truncated);
  REQUIRE_THROWS_AS(fl::read_panel(dir), fl::data_error);
  restore();

  // A duplicated row.
  const std::size_t header_end = csv.find('\n') + 1;
  const std::size_t first_row_end = csv.find('\n', header_end) + 1;
  const std::string first_row = csv.substr(header_end, first_row_end - header_end);
  fl::write_file_atomic(dir / "panel.csv", csv + first_row);
  REQUIRE_THROWS_AS(fl::read_panel(dir), fl::data_error);

  // An unparseable value.
  std::string garbled = csv;
  garbled.replace(garbled.rfind(','), std::string::npos, ",not-a-number\n");
  fl::write_file_atomic(dir / "panel.csv", garbled);
  REQUIRE_THROWS_AS(fl::read_panel(dir), fl::data_error);

  // A row naming an unknown variable.
  std::string renamed = csv;
  replace_once(renamed, "f2", "zz");
  fl::write_file_atomic(dir / "panel.csv", renamed);
  REQUIRE_THROWS_AS(fl::read_panel(dir), fl::data_error);
  restore();

  // A sidecar that disagrees with the CSV shape.
  std::string lying = sidecar;
  replace_once(lying, "\"n\": 4", "\"n\": 5");
  fl::write_file_atomic(dir / "panel.json", lying);
  REQUIRE_THROWS_AS(fl::read_panel(dir), fl::data_error);
  restore();

  // A wrong header.
  std::string bad_header = csv;
  replace_once(bad_header, "sample_id", "row_id");
  fl::write_file_atomic(dir / "panel.csv", bad_header);
  REQUIRE_THROWS_AS(fl::read_panel(dir), fl::data_error);
  restore();

  REQUIRE_NOTHROW(fl::read_panel(dir));  // the restored copy still parses
}

TEST_CASE("ground truth files round-trip") {
  const fs::path dir = fresh_dir("truth");
  fl::SynthConfig config;
  config.n = 5;
  config.p = 4;
  config.w = 12;
  const auto [panel, truth] = fl::generate(config);
  fl::write_truth(dir / "truth.json", truth, panel.variable_names, fl::json::object());
  const fl::TruthFile back = fl::read_truth(dir / "truth.json");
  REQUIRE(back.graph == truth.graph);
  REQUIRE(back.order == truth.order);
  REQUIRE(back.block_law == "identity");
  REQUIRE(back.variables == panel.variable_names);

  fl::write_file_atomic(dir / "truth.json", "[]\n");
  REQUIRE_THROWS_AS(fl::read_truth(dir / "truth.json"), fl::data_error);
}

TEST_CASE("fitted models round-trip with their basis descriptor") {
  const fs::path dir = fresh_dir("model");
  const fl::CurvePanel panel = small_panel(30, 2, 40, 31);
  const fl::BasisSystem basis = fl::bspline_basis(panel.grid, 10, 4);
  const fl::CoefPanel coefs = fl::fit_coefficients(panel, basis);
  const fl::FpcaModel model = fl::fpca_fit(coefs);

  fl::write_fpca_model(dir / "model.json", model, panel.variable_names, fl::json::object());
  const fl::FpcaModel back = fl::read_fpca_model(dir / "model.json");
  REQUIRE(back.l == model.l);
  REQUIRE(back.basis->kind == fl::BasisKind::bspline);
  REQUIRE((back.gram - model.gram).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(back.variables.size() == model.variables.size());
  for (std::size_t j = 0; j < model.variables.size(); ++j) {
    const fl::VariableFpca& a = model.variables[j];
    const fl::VariableFpca& b = back.variables[j];
    REQUIRE((a.mean_coef - b.mean_coef).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((a.eigenvalues - b.eigenvalues).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((a.loadings - b.loadings).cwiseAbs().maxCoeff() == 0.0);
  }

  // Tampered loadings dimensions are rejected.
  fl::json j = fl::parse_json_file(dir / "model.json");
  j.at("variables").at(0).at("loadings").get_ref<fl::json::array_t&>().pop_back();
  fl::write_file_atomic(dir / "model.json", fl::dump_json(j));
  REQUIRE_THROWS_AS(fl::read_fpca_model(dir / "model.json"), fl::data_error);
}

TEST_CASE("discovery reports round-trip their graph and order") {
  const fs::path dir = fresh_dir("report");
  const fl::CurvePanel panel = small_panel(60, 2, 30, 41);
  fl::DiscoveryConfig dc;
  dc.basis_dim = 10;
  const fl::DiscoveryReport report = fl::discover(panel, dc);
  fl::write_report(dir, report, fl::json{{"command", "discover"}});
  REQUIRE(fs::exists(dir / "report.json"));
  REQUIRE(fs::exists(dir / "graph.dot"));

  const fl::ReportFile back = fl::read_report(dir / "report.json");
  REQUIRE(back.graph == report.graph);
  REQUIRE(back.order == report.order);
  REQUIRE(back.variables == report.variable_names);

  const fl::json j = fl::parse_json_file(dir / "report.json");
  REQUIRE(j.at("m").get<int>() == report.m);
  REQUIRE(j.at("stages").size() == report.stages.size());
  REQUIRE(j.at("config").at("command").get<std::string>() == "discover");
  REQUIRE(j.at("block_norms").size() == 2);
}

TEST_CASE("metrics files carry the structural distance only when present") {
  const fs::path dir = fresh_dir("metrics");
  const fl::MetricsReport with =
      fl::evaluate_graphs(fl::chain_graph(3), fl::chain_graph(3));
  fl::write_metrics(dir / "with.json", with, fl::json::object());
  const fl::json a = fl::parse_json_file(dir / "with.json");
  REQUIRE(a.at("shd").get<long long>() == 0);
  REQUIRE(a.at("precision").get<double>() == 1.0);

  const fl::MetricsReport without = fl::confusion(fl::chain_graph(3), fl::chain_graph(3));
  fl::write_metrics(dir / "without.json", without, fl::json::object());
  REQUIRE(!fl::parse_json_file(dir / "without.json").contains("shd"));
}

TEST_CASE("trial tables write one CSV row per cell metric") {
  const fs::path dir = fresh_dir("table");
  fl::BenchmarkConfig config;
  config.ns = {40};
  config.ps = {2};
  config.trials = 2;
  config.w = 30;
  config.discovery.basis_dim = 10;
  config.threads = 1;
  const fl::TrialTable table = fl::benchmark(config);
  fl::write_trial_table(dir, table, fl::json{{"command", "benchmark"}});

  const std::string csv = fl::read_text(dir / "table.csv");
  REQUIRE(csv.rfind("n,p,metric,mean,sd,trials\n", 0) == 0);
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 5);  // header + 4 metrics

  const fl::json j = fl::parse_json_file(dir / "table.json");
  REQUIRE(j.at("cells").size() == 1);
  REQUIRE(j.at("cells").at(0).at("n").get<int>() == 40);
  REQUIRE(j.at("cells").at(0).at("trial_seeds").size() == 2);
  REQUIRE(j.at("config").at("command").get<std::string>() == "benchmark");
}

TEST_CASE("gaussianity outputs pair a wide CSV with a summary") {
  const fs::path dir = fresh_dir("gaussianity");
  const fl::CurvePanel panel = small_panel(50, 2, 10, 51);
  const fl::GaussianityScan scan = fl::gaussianity_scan(panel);
  fl::write_gaussianity(dir, scan, panel.variable_names, fl::json::object(), 0.05);

  const std::string csv = fl::read_text(dir / "gaussianity.csv");
  REQUIRE(csv.rfind("variable_id,t0,t1,t2,t3,t4,t5,t6,t7,t8,t9\n", 0) == 0);
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + one row per variable

  const fl::json j = fl::parse_json_file(dir / "gaussianity_summary.json");
  REQUIRE(j.at("alpha").get<double>() == 0.05);
  REQUIRE(j.at("rejection_fraction").get<double>() ==
          fl::rejection_fraction(scan, 0.05));
  REQUIRE(j.at("degenerate_count").get<int>() == 0);
}

// ---------------------------------------------------------------------------
// End-to-end runs of the installed command-line binary.

TEST_CASE("the CLI pipeline runs generate, discover, evaluate, and diagnose") {
  const fs::path root = fresh_dir("cli-pipeline");
  const std::string data = (root / "data").string();
  const std::string found = (root / "found").string();
  const std::string scored = (root / "scored").string();
  const std::string scanned = (root / "scanned").string();

  REQUIRE(run_cli("generate --n 60 --p 2 --w 30 --seed 7 --out " + data) == 0);
  REQUIRE(fs::exists(fs::path(data) / "panel.csv"));
  REQUIRE(fs::exists(fs::path(data) / "panel.json"));
  REQUIRE(fs::exists(fs::path(data) / "truth.json"));

  REQUIRE(run_cli("discover --in " + data + " --out " + found + " --basis-l 10") == 0);
  for (const char* name : {"report.json", "graph.dot", "model.json", "scores.csv"})
    REQUIRE(fs::exists(fs::path(found) / name));

  REQUIRE(run_cli("evaluate --in " + found + "/report.json --truth " + data +
                  "/truth.json --out " + scored) == 0);
  const fl::json metrics = fl::parse_json_file(fs::path(scored) / "metrics.json");
  REQUIRE(metrics.at("precision").get<double>() >= 0.0);
  REQUIRE(metrics.at("precision").get<double>() <= 1.0);
  REQUIRE(metrics.at("shd").get<long long>() >= 0);

  REQUIRE(run_cli("diagnose --in " + data + " --out " + scanned) == 0);
  REQUIRE(fs::exists(fs::path(scanned) / "gaussianity.csv"));
  REQUIRE(fs::exists(fs::path(scanned) / "gaussianity_summary.json"));
}

TEST_CASE("the CLI benchmark writes a table over the requested grid") {
  const fs::path root = fresh_dir("cli-benchmark");
  const std::string out = (root / "bench").string();
  REQUIRE(run_cli("benchmark --n 40,50 --p 2 --trials 2 --w 30 --basis-l 10 --seed 3 --out " +
                  out) == 0);
  const fl::json j = fl::parse_json_file(fs::path(out) / "table.json");
  REQUIRE(j.at("cells").size() == 2);
  REQUIRE(j.at("cells").at(0).at("n").get<int>() == 40);
  REQUIRE(j.at("cells").at(1).at("n").get<int>() == 50);
  REQUIRE(j.at("cells").at(0).at("failed").get<int>() == 0);

  // A cell whose trials all fail still writes the table but exits nonzero.
  const std::string broken = (root / "broken").string();
  REQUIRE(run_cli("benchmark --n 40 --p 2 --trials 2 --w 30 --basis-l 10 --m 15 --out " +
                  broken) == 1);
  const fl::json flagged = fl::parse_json_file(fs::path(broken) / "table.json");
  REQUIRE(flagged.at("cells").at(0).at("failed").get<int>() == 2);
  REQUIRE(flagged.at("cells").at(0).at("flagged").get<bool>());
}

TEST_CASE("CLI usage problems exit with status 2") {
  const fs::path root = fresh_dir("cli-usage");
  const std::string out = (root / "x").string();
  REQUIRE(run_cli("generate --p 1 --out " + out) == 2);        // invalid p
  REQUIRE(run_cli("generate --n 30 --w 30") == 2);             // missing --out
  REQUIRE(run_cli("generate --law uniform --out " + out) == 2);
  REQUIRE(run_cli("discover --in " + (root / "absent").string() + " --out " + out) == 2);
  REQUIRE(run_cli("benchmark --n 40,abc --p 2 --out " + out) == 2);
  REQUIRE(run_cli("frobnicate") == 2);                         // unknown subcommand
  REQUIRE(run_cli("generate --frobnicate --out " + out) == 2); // unknown flag
  REQUIRE(run_cli("") == 2);                                   // a subcommand is required
  REQUIRE(run_cli("--help") == 0);
  REQUIRE(run_cli("generate --help") == 0);
}

TEST_CASE("CLI rejects mismatched evaluate inputs and short diagnose panels") {
  const fs::path root = fresh_dir("cli-mismatch");
  const std::string two = (root / "two").string();
  const std::string three = (root / "three").string();
  const std::string found = (root / "found").string();
  const std::string out = (root / "out").string();

  REQUIRE(run_cli("generate --n 60 --p 2 --w 30 --out " + two) == 0);
  REQUIRE(run_cli("generate --n 60 --p 3 --w 30 --out " + three) == 0);
  REQUIRE(run_cli("discover --in " + two + " --out " + found + " --basis-l 10") == 0);
  REQUIRE(run_cli("evaluate --in " + found + "/report.json --truth " + three +
                  "/truth.json --out " + out) == 2);

  const std::string tiny = (root / "tiny").string();
  REQUIRE(run_cli("generate --n 10 --p 2 --w 30 --out " + tiny) == 0);
  REQUIRE(run_cli("diagnose --in " + tiny + " --out " + out) == 2);  // needs n >= 20
}

TEST_CASE("CLI reruns reproduce artifacts byte for byte") {
  const fs::path root = fresh_dir("cli-determinism");
  const std::string data = (root / "data").string();
  const std::string args = "generate --n 40 --p 2 --w 25 --seed 99 --out " + data;
  REQUIRE(run_cli(args) == 0);
  const std::string panel_csv = fl::read_text(fs::path(data) / "panel.csv");
  const std::string panel_json = fl::read_text(fs::path(data) / "panel.json");
  const std::string truth_json = fl::read_text(fs::path(data) / "truth.json");
  REQUIRE(run_cli(args) == 0);
  REQUIRE(fl::read_text(fs::path(data) / "panel.csv") == panel_csv);
  REQUIRE(fl::read_text(fs::path(data) / "panel.json") == panel_json);
  REQUIRE(fl::read_text(fs::path(data) / "truth.json") == truth_json);

  const std::string found = (root / "found").string();
  const std::string discover_args =
      "discover --in " + data + " --out " + found + " --basis-l 10 --seed 5";
  REQUIRE(run_cli(discover_args) == 0);
  const std::string report = fl::read_text(fs::path(found) / "report.json");
  const std::string scores = fl::read_text(fs::path(found) / "scores.csv");
  REQUIRE(run_cli(discover_args) == 0);
  REQUIRE(fl::read_text(fs::path(found) / "report.json") == report);
  REQUIRE(fl::read_text(fs::path(found) / "scores.csv") == scores);
}

TEST_CASE("CLI config files apply beneath explicit flags") {
  const fs::path root = fresh_dir("cli-config");
  const std::string data = (root / "data").string();
  fl::write_file_atomic(root / "gen.json", "{\"n\": 25, \"p\": 2, \"w\": 30}\n");
  REQUIRE(run_cli("generate --config " + (root / "gen.json").string() + " --seed 1 --out " +
                  data) == 0);
  REQUIRE(fl::parse_json_file(fs::path(data) / "panel.json").at("n").get<int>() == 25);

  // The flag wins over the config file for the same key.
  const std::string more = (root / "more").string();
  REQUIRE(run_cli("generate --config " + (root / "gen.json").string() + " --n 30 --seed 1 --out " +
                  more) == 0);
  REQUIRE(fl::parse_json_file(fs::path(more) / "panel.json").at("n").get<int>() == 30);

  fl::write_file_atomic(root / "dis.json", "{\"tau\": 0.9, \"basis_l\": 10}\n");
  const std::string found = (root / "found").string();
  REQUIRE(run_cli("discover --in " + data + " --out " + found + " --config " +
                  (root / "dis.json").string()) == 0);
  const fl::json from_config = fl::parse_json_file(fs::path(found) / "report.json");
  REQUIRE(from_config.at("config").at("tau").get<double>() == 0.9);
  REQUIRE(from_config.at("config").at("basis_l").get<int>() == 10);

  REQUIRE(run_cli("discover --in " + data + " --out " + found + " --config " +
                  (root / "dis.json").string() + " --tau 0.3") == 0);
  const fl::json overridden = fl::parse_json_file(fs::path(found) / "report.json");
  REQUIRE(overridden.at("config").at("tau").get<double>() == 0.3);
  REQUIRE(overridden.at("config").at("basis_l").get<int>() == 10);

  // A config file that is not a JSON object is a data problem.
  fl::write_file_atomic(root / "list.json", "[1, 2]\n");
  REQUIRE(run_cli("generate --config " + (root / "list.json").string() + " --out " + data) == 2);
}
