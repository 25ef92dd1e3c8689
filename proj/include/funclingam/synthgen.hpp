#pragma once

#include "funclingam/common.hpp"
#include "funclingam/curves.hpp"
#include "funclingam/graph.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace funclingam {

enum class CoefficientLaw { squared_gaussian, gaussian };

inline std::string to_string(CoefficientLaw law) {
  return law == CoefficientLaw::squared_gaussian ? "squared" : "gaussian";
}

inline CoefficientLaw coefficient_law_from_string(const std::string& s) {
  if (s == "squared") return CoefficientLaw::squared_gaussian;
  if (s == "gaussian") return CoefficientLaw::gaussian;
  throw invalid_argument_error("coefficient law must be 'squared' or 'gaussian', got '" + s + "'");
}

/// Configuration of the chain-graph synthetic generator. Coefficients follow
/// the recursion delta_1 = eps_1, delta_l = delta_{l-1} + eps_l with
/// independent innovations; curves are Fourier expansions of the coefficients
/// sampled on a W-point equidistant grid; observation noise is q^2 with
/// q ~ N(0, noise_sd^2).
struct SynthConfig {
  int n = 100;
  int p = 5;
  int w = 1000;
  std::uint64_t seed = 0;
  int coef_dim = 5;        // must be odd (Fourier basis dimension)
  double noise_sd = 0.5;   // q ~ N(0, 0.25) by default; e = q^2 is Gamma(1/2, 1/2)
  CoefficientLaw law = CoefficientLaw::squared_gaussian;
};

struct GroundTruth {
  BinaryGraph graph;
  CausalOrder order;
  std::string block_law;  // description of the per-edge operator ("identity")
};

inline void validate_synth_config(const SynthConfig& config) {
  require_arg(config.n >= 2, "SynthConfig: n must be >= 2");
  require_arg(config.p >= 2, "SynthConfig: p must be >= 2");
  require_arg(config.w >= 10, "SynthConfig: W must be >= 10");
  require_arg(config.coef_dim >= 1 && config.coef_dim % 2 == 1,
              "SynthConfig: coef_dim must be a positive odd integer");
  require_arg(config.noise_sd > 0.0, "SynthConfig: noise variance must be positive");
}

/// A vector of squared standard normals (chi-squared with 1 degree of freedom
/// per entry: mean 1, variance 2, skewness sqrt(8)).
inline Vector squared_gaussian_vector(int d, std::mt19937_64& rng) {
  require_arg(d >= 1, "squared_gaussian_vector: d must be >= 1");
  std::normal_distribution<double> unit(0.0, 1.0);
  Vector v(d);
  for (int c = 0; c < d; ++c) {
    const double z = unit(rng);
    v[c] = z * z;
  }
  return v;
}

/// Generate a panel from the chain model. Draw order is pinned for
/// reproducibility: innovations sample-major (for each sample, each variable
/// in chain order, coef_dim draws), then observation noise variable-major
/// (for each variable, each sample, each time point).
inline std::pair<CurvePanel, GroundTruth> generate(const SynthConfig& config) {
  validate_synth_config(config);
  const int n = config.n, p = config.p, d = config.coef_dim;

  TimeGrid grid = build_time_grid(config.w);
  BasisSystem basis = fourier_basis(grid, d);

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<Matrix> delta(static_cast<std::size_t>(p), Matrix(n, d));
  for (int i = 0; i < n; ++i) {
    Vector running = Vector::Zero(d);
    for (int l = 0; l < p; ++l) {
      for (int c = 0; c < d; ++c) {
        const double z = unit(rng);
        running[c] += config.law == CoefficientLaw::squared_gaussian ? z * z : z;
      }
      delta[static_cast<std::size_t>(l)].row(i) = running.transpose();
    }
  }

  std::vector<Matrix> values(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j)
    values[static_cast<std::size_t>(j)] = delta[static_cast<std::size_t>(j)] * basis.eval.transpose();

  std::normal_distribution<double> noise(0.0, config.noise_sd);
  for (int j = 0; j < p; ++j) {
    Matrix& v = values[static_cast<std::size_t>(j)];
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < config.w; ++k) {
        const double q = noise(rng);
        v(i, k) += q * q;
      }
    }
  }

  GroundTruth truth;
  truth.graph = chain_graph(p);
  truth.order = identity_order(p);
  truth.block_law = "identity";
  return {make_curve_panel(std::move(grid), default_variable_names(p), std::move(values)),
          std::move(truth)};
}

/// The bivariate control condition: the identical pipeline with plain
/// Gaussian innovations, under which the causal direction is not
/// identifiable from observational data.
inline std::pair<CurvePanel, GroundTruth> generate_bivariate_gaussian(const SynthConfig& config) {
  require_arg(config.p == 2, "generate_bivariate_gaussian: p must be 2");
  SynthConfig gaussian = config;
  gaussian.law = CoefficientLaw::gaussian;
  return generate(gaussian);
}

}  // namespace funclingam
