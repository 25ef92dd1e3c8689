#pragma once

#include "funclingam/common.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace funclingam {

/// Shared observation times in [0, 1].
struct TimeGrid {
  std::vector<double> points;

  int w() const { return static_cast<int>(points.size()); }

  bool operator==(const TimeGrid&) const = default;
};

inline void validate_time_grid(const TimeGrid& grid) {
  require_arg(grid.w() >= 2, "TimeGrid: needs at least 2 points");
  for (std::size_t k = 0; k < grid.points.size(); ++k) {
    double t = grid.points[k];
    if (!std::isfinite(t)) throw data_error("TimeGrid: non-finite point");
    if (t < 0.0 || t > 1.0)
      throw invalid_argument_error("TimeGrid: points must lie in [0, 1]");
    if (k > 0 && !(grid.points[k - 1] < t))
      throw invalid_argument_error("TimeGrid: points must be strictly increasing");
  }
}

/// W equidistant points with t_1 = 0 and t_W = 1.
inline TimeGrid build_time_grid(int w) {
  require_arg(w >= 2, "build_time_grid: W must be >= 2");
  TimeGrid grid;
  grid.points.resize(static_cast<std::size_t>(w));
  const double denom = static_cast<double>(w - 1);
  for (int k = 0; k < w; ++k) grid.points[static_cast<std::size_t>(k)] = static_cast<double>(k) / denom;
  grid.points.front() = 0.0;
  grid.points.back() = 1.0;
  return grid;
}

inline std::vector<std::string> default_variable_names(int p) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) names.push_back("f" + std::to_string(j + 1));
  return names;
}

/// n samples of p functional variables observed on a shared grid.
/// values[j] is the n x W matrix of variable j; row i is sample i's curve.
struct CurvePanel {
  TimeGrid grid;
  std::vector<std::string> variable_names;
  std::vector<Matrix> values;

  int n() const { return values.empty() ? 0 : static_cast<int>(values.front().rows()); }
  int p() const { return static_cast<int>(values.size()); }
  int w() const { return grid.w(); }
};

inline CurvePanel make_curve_panel(TimeGrid grid, std::vector<std::string> variable_names,
                                   std::vector<Matrix> values) {
  validate_time_grid(grid);
  const int p = static_cast<int>(values.size());
  require_arg(p >= 2, "CurvePanel: p must be >= 2");
  require_arg(static_cast<int>(variable_names.size()) == p,
              "CurvePanel: one name per variable required");
  for (std::size_t a = 0; a < variable_names.size(); ++a) {
    require_arg(!variable_names[a].empty(), "CurvePanel: variable names must be non-empty");
    for (std::size_t b = a + 1; b < variable_names.size(); ++b)
      require_arg(variable_names[a] != variable_names[b],
                  "CurvePanel: variable names must be distinct");
  }
  const Index n = values.front().rows();
  require_arg(n >= 2, "CurvePanel: n must be >= 2");
  for (const Matrix& v : values) {
    require_arg(v.rows() == n, "CurvePanel: inconsistent sample counts across variables");
    require_arg(v.cols() == grid.w(), "CurvePanel: value columns must match grid length");
    require_finite(v, "CurvePanel");
  }
  CurvePanel panel;
  panel.grid = std::move(grid);
  panel.variable_names = std::move(variable_names);
  panel.values = std::move(values);
  return panel;
}

enum class BasisKind { bspline, fourier };

/// A basis evaluated on a grid: eval is W x L, gram the L x L matrix of
/// trapezoid-quadrature inner products of the basis functions.
struct BasisSystem {
  BasisKind kind = BasisKind::bspline;
  int l = 0;
  int order = 0;               // B-spline order (degree + 1); 0 for Fourier
  std::vector<double> knots;   // B-spline knot vector; empty for Fourier
  int harmonics = 0;           // Fourier K; 0 for B-spline
  TimeGrid grid;
  Matrix eval;
  Matrix gram;
};

inline Vector trapezoid_weights(const TimeGrid& grid) {
  const int w = grid.w();
  Vector weights(w);
  weights[0] = 0.5 * (grid.points[1] - grid.points[0]);
  for (int k = 1; k + 1 < w; ++k)
    weights[k] = 0.5 * (grid.points[static_cast<std::size_t>(k) + 1] -
                        grid.points[static_cast<std::size_t>(k) - 1]);
  weights[w - 1] = 0.5 * (grid.points[static_cast<std::size_t>(w) - 1] -
                          grid.points[static_cast<std::size_t>(w) - 2]);
  return weights;
}

inline Matrix trapezoid_gram(const Matrix& eval, const TimeGrid& grid) {
  Vector weights = trapezoid_weights(grid);
  Matrix g = eval.transpose() * weights.asDiagonal() * eval;
  return symmetrized(g);
}

/// Clamped uniform-knot B-spline basis of dimension L and the given order
/// (order = degree + 1; order 4 is cubic). Rows of eval form a partition of
/// unity.
inline BasisSystem bspline_basis(const TimeGrid& grid, int l, int order = 4) {
  validate_time_grid(grid);
  require_arg(order >= 1, "bspline_basis: order must be >= 1");
  require_arg(l >= order, "bspline_basis: L must be >= order");
  const int w = grid.w();
  if (l >= w)
    throw singularity_error("bspline_basis: L must be < W to keep the basis full rank");

  // Clamped knot vector: `order` zeros, uniform interior knots, `order` ones.
  const int interior = l - order;
  std::vector<double> knots(static_cast<std::size_t>(l + order));
  for (int i = 0; i < order; ++i) knots[static_cast<std::size_t>(i)] = 0.0;
  for (int i = 1; i <= interior; ++i)
    knots[static_cast<std::size_t>(order - 1 + i)] =
        static_cast<double>(i) / static_cast<double>(interior + 1);
  for (int i = 0; i < order; ++i) knots[static_cast<std::size_t>(l + i)] = 1.0;

  auto find_span = [&](double t) -> int {
    if (t >= 1.0) return l - 1;
    int lo = order - 1, hi = l - 1, span = order - 1;
    while (lo <= hi) {
      const int mid = lo + (hi - lo) / 2;
      if (knots[static_cast<std::size_t>(mid)] <= t) {
        span = mid;
        lo = mid + 1;
      } else {
        hi = mid - 1;
      }
    }
    return span;
  };

  Matrix eval = Matrix::Zero(w, l);
  std::vector<double> fn(static_cast<std::size_t>(order));
  std::vector<double> left(static_cast<std::size_t>(order));
  std::vector<double> right(static_cast<std::size_t>(order));
  for (int k = 0; k < w; ++k) {
    const double t = grid.points[static_cast<std::size_t>(k)];
    require_arg(t >= 0.0 && t <= 1.0, "bspline_basis: grid points must lie in [0, 1]");
    const int span = find_span(t);
    // Triangular recurrence over the `order` basis functions active on span.
    fn[0] = 1.0;
    for (int j = 1; j < order; ++j) {
      left[static_cast<std::size_t>(j)] = t - knots[static_cast<std::size_t>(span + 1 - j)];
      right[static_cast<std::size_t>(j)] = knots[static_cast<std::size_t>(span + j)] - t;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        const double denom =
            right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
        const double temp = denom != 0.0 ? fn[static_cast<std::size_t>(r)] / denom : 0.0;
        fn[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
        saved = left[static_cast<std::size_t>(j - r)] * temp;
      }
      fn[static_cast<std::size_t>(j)] = saved;
    }
    for (int r = 0; r < order; ++r) eval(k, span - order + 1 + r) = fn[static_cast<std::size_t>(r)];
  }

  BasisSystem basis;
  basis.kind = BasisKind::bspline;
  basis.l = l;
  basis.order = order;
  basis.knots = std::move(knots);
  basis.grid = grid;
  basis.eval = std::move(eval);
  basis.gram = trapezoid_gram(basis.eval, grid);
  return basis;
}

/// Fourier basis {1, sqrt(2) sin(2*pi*t), sqrt(2) cos(2*pi*t), ...} with K odd,
/// scaled so the gram is approximately the identity on [0, 1].
inline BasisSystem fourier_basis(const TimeGrid& grid, int k) {
  validate_time_grid(grid);
  require_arg(k >= 1 && k % 2 == 1, "fourier_basis: K must be a positive odd integer");
  const int w = grid.w();
  if (k >= w)
    throw singularity_error("fourier_basis: K must be < W to keep the basis full rank");

  const double two_pi = 2.0 * std::numbers::pi;
  const double sqrt2 = std::sqrt(2.0);
  Matrix eval(w, k);
  for (int row = 0; row < w; ++row) {
    const double t = grid.points[static_cast<std::size_t>(row)];
    eval(row, 0) = 1.0;
    for (int h = 1; 2 * h < k + 1; ++h) {
      eval(row, 2 * h - 1) = sqrt2 * std::sin(two_pi * h * t);
      eval(row, 2 * h) = sqrt2 * std::cos(two_pi * h * t);
    }
  }

  BasisSystem basis;
  basis.kind = BasisKind::fourier;
  basis.l = k;
  basis.harmonics = k;
  basis.grid = grid;
  basis.eval = std::move(eval);
  basis.gram = trapezoid_gram(basis.eval, grid);
  return basis;
}

/// Basis coefficients of smoothed curves. coefs[j] is n x L for variable j.
struct CoefPanel {
  std::shared_ptr<const BasisSystem> basis;
  std::vector<std::string> variable_names;
  std::vector<Matrix> coefs;

  int n() const { return coefs.empty() ? 0 : static_cast<int>(coefs.front().rows()); }
  int p() const { return static_cast<int>(coefs.size()); }
  int l() const { return basis ? basis->l : 0; }
};

/// Per-curve penalized least squares: minimize ||y - Phi c||^2 + ridge ||c||^2.
/// With ridge = 0 the residual of every fitted curve is orthogonal to the
/// basis columns (normal equations).
inline CoefPanel fit_coefficients(const CurvePanel& panel, const BasisSystem& basis,
                                  double ridge) {
  require_arg(ridge >= 0.0, "fit_coefficients: ridge must be >= 0");
  require_arg(panel.grid == basis.grid,
              "fit_coefficients: panel grid must match the basis grid");
  require_finite(basis.eval, "fit_coefficients: basis eval");

  const Matrix& phi = basis.eval;
  Matrix normal = symmetrized(phi.transpose() * phi);
  if (ridge == 0.0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(normal, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
      throw numeric_error("fit_coefficients: eigensolve of normal matrix failed");
    const double max_eig = es.eigenvalues().maxCoeff();
    if (!(es.eigenvalues().minCoeff() > 1e-12 * std::max(max_eig, 0.0)))
      throw singularity_error(
          "fit_coefficients: basis normal equations are singular; use ridge > 0 or smaller L");
  }
  Matrix regularized = normal + ridge * Matrix::Identity(basis.l, basis.l);
  Eigen::LDLT<Matrix> ldlt(regularized);
  if (ldlt.info() != Eigen::Success)
    throw numeric_error("fit_coefficients: factorization of normal equations failed");

  CoefPanel out;
  out.basis = std::make_shared<const BasisSystem>(basis);
  out.variable_names = panel.variable_names;
  out.coefs.reserve(panel.values.size());
  for (const Matrix& curves : panel.values) {
    Matrix rhs = curves * phi;  // n x L
    out.coefs.push_back(ldlt.solve(rhs.transpose()).transpose());
  }
  return out;
}

/// Default ridge: 1e-10 relative to trace(Phi^T Phi).
inline CoefPanel fit_coefficients(const CurvePanel& panel, const BasisSystem& basis) {
  return fit_coefficients(panel, basis, 1e-10 * basis.eval.squaredNorm());
}

/// Evaluate the smoothed curves back on the basis grid: values = coefs * eval^T.
inline CurvePanel reconstruct(const CoefPanel& coefs) {
  require_arg(static_cast<bool>(coefs.basis), "reconstruct: coefficient panel has no basis");
  const BasisSystem& basis = *coefs.basis;
  std::vector<Matrix> values;
  values.reserve(coefs.coefs.size());
  for (const Matrix& c : coefs.coefs) {
    require_arg(c.cols() == basis.l, "reconstruct: coefficient width must match basis L");
    values.push_back(c * basis.eval.transpose());
  }
  return make_curve_panel(basis.grid, coefs.variable_names, std::move(values));
}

}  // namespace funclingam
