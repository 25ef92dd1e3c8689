#pragma once

#include "funclingam/common.hpp"
#include "funclingam/curves.hpp"
#include "funclingam/dependence.hpp"
#include "funclingam/fpca.hpp"
#include "funclingam/graph.hpp"

#include <algorithm>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace funclingam {

struct DiscoveryConfig {
  int basis_dim = 20;             // L: B-spline basis dimension
  int basis_order = 4;            // cubic by default
  double evr = 0.99;              // explained-variance ratio for choosing M
  int fixed_m = 0;                // > 0 overrides the EVR selection
  double tau = 0.2;               // edge threshold on ||block||_F / sqrt(M)
  double ridge = 1e-8;            // regression ridge, relative to mean diag Cov(X)
  double smoothing_ridge = 1e-10; // smoothing ridge, relative to trace(Phi^T Phi)
  std::string measure = "hsic";
  std::uint64_t hsic_subsample = 2000;
  std::uint64_t seed = 0;
};

/// One greedy stage: the candidate variables considered, their exogeneity
/// scores (aligned with `candidates`), and the selected variable.
struct StageRecord {
  int stage = 0;
  std::vector<int> candidates;
  std::vector<double> scores;
  int chosen = -1;
};

struct OrderResult {
  CausalOrder order;
  std::vector<StageRecord> stages;
};

/// p x p grid of M x M operator blocks; block(i, j) is the effect of variable
/// j on variable i. Blocks not estimated stay exactly zero.
struct BlockMatrix {
  int p = 0;
  int m = 0;
  std::vector<Matrix> blocks;

  BlockMatrix() = default;

  BlockMatrix(int p_, int m_) {
    require_arg(p_ >= 1 && m_ >= 1, "BlockMatrix: p and M must be >= 1");
    p = p_;
    m = m_;
    blocks.assign(static_cast<std::size_t>(p) * static_cast<std::size_t>(p),
                  Matrix::Zero(m, m));
  }

  Matrix& block(int i, int j) { return blocks[index(i, j)]; }
  const Matrix& block(int i, int j) const { return blocks[index(i, j)]; }

  std::size_t index(int i, int j) const {
    require_arg(i >= 0 && i < p && j >= 0 && j < p, "BlockMatrix: index out of range");
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(p) + static_cast<std::size_t>(j);
  }
};

struct DiscoveryReport {
  CausalOrder order;
  std::vector<StageRecord> stages;
  BlockMatrix blocks;
  Matrix block_norms;  // p x p Frobenius norms of the blocks
  BinaryGraph graph;
  int m = 0;
  std::vector<std::string> variable_names;
  DiscoveryConfig config;
  FpcaModel model;
  ScorePanel scores;
};

namespace detail {

/// Re-throws the current library exception with a stage tag prefixed to its
/// message, preserving the exception type (and hence the failure class).
template <typename Fn>
auto tag_errors(const std::string& tag, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const invalid_argument_error& e) {
    throw invalid_argument_error(tag + ": " + e.what());
  } catch (const data_error& e) {
    throw data_error(tag + ": " + e.what());
  } catch (const singularity_error& e) {
    throw singularity_error(tag + ": " + e.what());
  } catch (const insufficient_data_error& e) {
    throw insufficient_data_error(tag + ": " + e.what());
  } catch (const degenerate_data_error& e) {
    throw degenerate_data_error(tag + ": " + e.what());
  } catch (const numeric_error& e) {
    throw numeric_error(tag + ": " + e.what());
  } catch (const io_error& e) {
    throw io_error(tag + ": " + e.what());
  }
}

inline void assert_centered(const Matrix& x, const char* context) {
  Eigen::RowVectorXd means = x.colwise().mean();
  require_arg(means.cwiseAbs().maxCoeff() <= 1e-6,
              std::string(context) + ": columns must be centered (max |mean| > 1e-6)");
}

inline Matrix centered_copy(const Matrix& x) {
  Eigen::RowVectorXd means = x.colwise().mean();
  return x.rowwise() - means;
}

}  // namespace detail

/// Multivariate least squares of Y (n x M) on centered X (n x d):
/// T = Cov(Y, X) (Cov(X) + ridge I)^{-1}, covariances with a 1/n factor.
/// `ridge` is an absolute value here; use relative_ridge() to derive it from
/// the data scale. Requires n > d only when ridge = 0 (the regularized normal
/// equations are well posed for any d).
inline Matrix ols_block(const Matrix& y, const Matrix& x, double ridge) {
  require_arg(x.rows() == y.rows(), "ols_block: X and Y must have the same number of rows");
  require_arg(x.cols() >= 1 && y.cols() >= 1, "ols_block: empty matrices");
  require_arg(ridge >= 0.0, "ols_block: ridge must be >= 0");
  require_finite(x, "ols_block: X");
  require_finite(y, "ols_block: Y");
  const Index n = x.rows();
  const Index d = x.cols();
  if (n < 2) throw insufficient_data_error("ols_block: need n >= 2");
  if (ridge == 0.0 && n <= d)
    throw insufficient_data_error("ols_block: need n > d when ridge = 0");
  detail::assert_centered(x, "ols_block");

  Matrix cov_x = symmetrized((x.transpose() * x) / static_cast<double>(n));
  if (ridge == 0.0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov_x, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw numeric_error("ols_block: eigensolve failed");
    const double max_eig = es.eigenvalues().maxCoeff();
    if (!(es.eigenvalues().minCoeff() > 1e-12 * std::max(max_eig, 0.0)))
      throw singularity_error("ols_block: Cov(X) is singular with ridge = 0");
  }
  Matrix regularized = cov_x + ridge * Matrix::Identity(d, d);
  Eigen::RowVectorXd y_means = y.colwise().mean();
  Matrix y_centered = y.rowwise() - y_means;
  Matrix cov_yx = (y_centered.transpose() * x) / static_cast<double>(n);  // M x d
  Eigen::LDLT<Matrix> ldlt(regularized);
  if (ldlt.info() != Eigen::Success)
    throw numeric_error("ols_block: factorization of the regularized covariance failed");
  return ldlt.solve(cov_yx.transpose()).transpose();
}

/// Absolute ridge derived from the data scale: rel * mean(diag Cov(X)).
inline double relative_ridge(const Matrix& x, double rel) {
  require_arg(rel >= 0.0, "relative_ridge: rel must be >= 0");
  const double mean_diag =
      x.squaredNorm() / (static_cast<double>(x.rows()) * static_cast<double>(x.cols()));
  return rel * mean_diag;
}

/// Regression residual r = Y - X ols_block(Y, X, ridge)^T.
inline Matrix residual(const Matrix& y, const Matrix& x, double ridge) {
  Matrix t = ols_block(y, x, ridge);
  return y - x * t.transpose();
}

/// Sum over i in `active` (i != j) of measure(F_j, residual(F_i, F_j)).
/// Addends are accumulated in sorted-value order so the total is independent
/// of variable labeling, which keeps the greedy argmin exactly permutation
/// equivariant.
inline double exogeneity_score(int j, const std::vector<int>& active,
                               const std::vector<Matrix>& mats, const DependenceMeasure& measure,
                               double ridge_rel) {
  require_arg(active.size() >= 2, "exogeneity_score: need at least two active variables");
  require_arg(std::find(active.begin(), active.end(), j) != active.end(),
              "exogeneity_score: j must be active");
  for (int i : active)
    require_arg(i >= 0 && i < static_cast<int>(mats.size()),
                "exogeneity_score: active index out of range");
  const Matrix& fj = mats[static_cast<std::size_t>(j)];
  const double ridge = relative_ridge(fj, ridge_rel);
  std::vector<double> addends;
  addends.reserve(active.size() - 1);
  for (int i : active) {
    if (i == j) continue;
    Matrix r = residual(mats[static_cast<std::size_t>(i)], fj, ridge);
    addends.push_back(measure(fj, r).value);
  }
  std::sort(addends.begin(), addends.end());
  double total = 0.0;
  for (double a : addends) total += a;
  return total;
}

inline double exogeneity_score(int j, const std::vector<int>& active, const ScorePanel& scores,
                               const DependenceMeasure& measure, double ridge_rel) {
  return exogeneity_score(j, active, scores.scores, measure, ridge_rel);
}

/// Greedy ordering on arbitrary centered sample matrices (one n x d matrix
/// per variable). At each stage the variable whose exogeneity score is
/// smallest (ties broken by lowest index) joins the order, every remaining
/// variable is replaced by its residual on the chosen one, and the residuals
/// are re-centered exactly.
inline OrderResult causal_order_matrices(std::vector<Matrix> work,
                                         const DependenceMeasure& measure, double ridge_rel) {
  const int p = static_cast<int>(work.size());
  require_arg(p >= 1, "causal_order: need at least one variable");
  for (const Matrix& m : work) {
    require_finite(m, "causal_order");
    detail::assert_centered(m, "causal_order");
  }

  OrderResult result;
  if (p == 1) {
    result.order.order = {0};
    return result;
  }

  std::vector<int> active(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i) active[static_cast<std::size_t>(i)] = i;

  for (int stage = 0; static_cast<int>(active.size()) > 1; ++stage) {
    StageRecord record;
    record.stage = stage;
    detail::tag_errors("ordering stage " + std::to_string(stage), [&] {
      for (int j : active) {
        record.candidates.push_back(j);
        record.scores.push_back(exogeneity_score(j, active, work, measure, ridge_rel));
      }
      std::size_t best = 0;
      for (std::size_t c = 1; c < record.scores.size(); ++c)
        if (record.scores[c] < record.scores[best]) best = c;
      record.chosen = record.candidates[best];
      return 0;
    });
    result.order.order.push_back(record.chosen);
    const Matrix& chosen_mat = work[static_cast<std::size_t>(record.chosen)];
    const double ridge = relative_ridge(chosen_mat, ridge_rel);
    detail::tag_errors("ordering stage " + std::to_string(stage) + " residual update", [&] {
      for (int i : active) {
        if (i == record.chosen) continue;
        Matrix r = residual(work[static_cast<std::size_t>(i)], chosen_mat, ridge);
        work[static_cast<std::size_t>(i)] = detail::centered_copy(r);
      }
      return 0;
    });
    active.erase(std::remove(active.begin(), active.end(), record.chosen), active.end());
    result.stages.push_back(std::move(record));
  }
  result.order.order.push_back(active.front());
  return result;
}

/// Greedy ordering over a score panel, with the dependence measure and ridge
/// taken from the config. Requires n > M when ridge = 0; with ridge > 0 the
/// regressions stay well posed for any dimension.
inline OrderResult causal_order(const ScorePanel& scores, const DiscoveryConfig& config) {
  require_arg(scores.p() >= 1, "causal_order: empty score panel");
  const Index n = scores.n();
  if (config.ridge == 0.0 && n <= scores.m)
    throw insufficient_data_error("causal_order: need n > M when ridge = 0");
  std::unique_ptr<DependenceMeasure> measure =
      make_measure(config.measure, static_cast<std::size_t>(config.hsic_subsample), config.seed);
  return causal_order_matrices(scores.scores, *measure, config.ridge);
}

/// Connection strengths under a fixed order: for each variable in K-order,
/// one joint regression on the concatenation of all its K-predecessors.
/// Blocks with K(j) >= K(i) remain exactly zero.
inline BlockMatrix estimate_adjacency(const ScorePanel& scores, const CausalOrder& k,
                                      double ridge_rel) {
  const int p = scores.p();
  require_arg(p >= 1, "estimate_adjacency: empty score panel");
  require_arg(is_valid_order(k, p), "estimate_adjacency: K is not a permutation of the variables");
  const int m = scores.m;
  BlockMatrix bm(p, m);
  if (p == 1) return bm;

  const Index n = scores.n();
  for (int pos = 1; pos < p; ++pos) {
    const int i = k.order[static_cast<std::size_t>(pos)];
    Matrix x(n, static_cast<Index>(pos) * m);
    for (int q = 0; q < pos; ++q)
      x.middleCols(static_cast<Index>(q) * m, m) =
          scores.scores[static_cast<std::size_t>(k.order[static_cast<std::size_t>(q)])];
    x = detail::centered_copy(x);
    Matrix t = detail::tag_errors("adjacency position " + std::to_string(pos), [&] {
      return ols_block(scores.scores[static_cast<std::size_t>(i)], x, relative_ridge(x, ridge_rel));
    });
    for (int q = 0; q < pos; ++q)
      bm.block(i, k.order[static_cast<std::size_t>(q)]) = t.middleCols(static_cast<Index>(q) * m, m);
  }
  return bm;
}

inline Matrix block_norms(const BlockMatrix& bm) {
  Matrix norms = Matrix::Zero(bm.p, bm.p);
  for (int i = 0; i < bm.p; ++i)
    for (int j = 0; j < bm.p; ++j) norms(i, j) = bm.block(i, j).norm();
  return norms;
}

/// Edge j -> i iff ||block(i, j)||_F / sqrt(M) > tau. Acyclicity is inherited
/// from the triangular block structure.
inline BinaryGraph binarize(const BlockMatrix& bm, double tau) {
  require_arg(tau > 0.0, "binarize: tau must be positive");
  BinaryGraph g(bm.p);
  const double scale = std::sqrt(static_cast<double>(bm.m));
  for (int i = 0; i < bm.p; ++i)
    for (int j = 0; j < bm.p; ++j)
      if (i != j && bm.block(i, j).norm() / scale > tau) g.set_edge(i, j, true);
  return g;
}

/// Singular values of one operator block, descending.
inline std::vector<double> operator_singular_values(const Matrix& block) {
  require_finite(block, "operator_singular_values");
  Eigen::JacobiSVD<Matrix> svd(block);
  const Vector& sv = svd.singularValues();
  return std::vector<double>(sv.data(), sv.data() + sv.size());
}

/// End-to-end pipeline: smooth onto a B-spline basis, fit FPCA, select M,
/// extract scores, order greedily by residual independence, estimate the
/// operator blocks, and threshold to a binary graph. Deterministic given the
/// panel and config.
inline DiscoveryReport discover(const CurvePanel& panel, const DiscoveryConfig& config) {
  require_arg(config.tau > 0.0, "discover: tau must be positive");
  require_arg(config.evr > 0.0 && config.evr <= 1.0, "discover: evr must lie in (0, 1]");
  require_arg(config.fixed_m >= 0, "discover: fixed M must be >= 0");
  require_arg(config.ridge >= 0.0 && config.smoothing_ridge >= 0.0,
              "discover: ridges must be >= 0");

  DiscoveryReport report;
  report.config = config;
  report.variable_names = panel.variable_names;

  CoefPanel coefs = detail::tag_errors("discover[smoothing]", [&] {
    BasisSystem basis = bspline_basis(panel.grid, config.basis_dim, config.basis_order);
    const double ridge = config.smoothing_ridge * basis.eval.squaredNorm();
    return fit_coefficients(panel, basis, ridge);
  });

  detail::tag_errors("discover[fpca]", [&] {
    report.model = fpca_fit(coefs);
    if (config.fixed_m > 0) {
      require_arg(config.fixed_m <= report.model.l, "fixed M must be <= basis dimension L");
      report.m = config.fixed_m;
    } else {
      report.m = choose_components(report.model, config.evr);
    }
    report.scores = transform(coefs, report.model, report.m);
    return 0;
  });

  OrderResult ordering = detail::tag_errors(
      "discover[ordering]", [&] { return causal_order(report.scores, config); });
  report.order = ordering.order;
  report.stages = std::move(ordering.stages);

  detail::tag_errors("discover[adjacency]", [&] {
    report.blocks = estimate_adjacency(report.scores, report.order, config.ridge);
    report.block_norms = block_norms(report.blocks);
    report.graph = binarize(report.blocks, config.tau);
    return 0;
  });
  return report;
}

}  // namespace funclingam
