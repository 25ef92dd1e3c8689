#pragma once

#include "funclingam/common.hpp"
#include "funclingam/curves.hpp"

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

namespace funclingam {

/// Per-variable functional PCA result. `loadings` (L x L) maps centered
/// coefficient vectors to scores through the gram inner product:
/// score = (c - mean)^T G loadings, and loadings^T G loadings = I.
struct VariableFpca {
  Vector mean_coef;    // L
  Vector eigenvalues;  // L, descending, >= 0
  Matrix loadings;     // L x L
};

struct FpcaModel {
  std::vector<VariableFpca> variables;
  Matrix gram;  // L x L gram of the fitting basis
  std::shared_ptr<const BasisSystem> basis;
  int l = 0;

  int p() const { return static_cast<int>(variables.size()); }
};

/// Centered principal-component scores. scores[j] is n x M for variable j.
struct ScorePanel {
  std::vector<Matrix> scores;
  int m = 0;
  std::vector<std::string> variable_names;
  std::shared_ptr<const FpcaModel> model;

  int n() const { return scores.empty() ? 0 : static_cast<int>(scores.front().rows()); }
  int p() const { return static_cast<int>(scores.size()); }
};

namespace detail {

/// Symmetric square root and inverse square root of a PSD matrix, with an
/// eigenvalue floor of 1e-12 * max eigenvalue to absorb numerical
/// semi-definiteness. Eigenvalues below -1e-10 * scale are rejected.
struct GramRoots {
  Matrix sqrt;
  Matrix inv_sqrt;
};

inline GramRoots gram_roots(const Matrix& gram) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(gram));
  if (es.info() != Eigen::Success)
    throw numeric_error("fpca_fit: eigensolve of the gram matrix failed");
  const Vector& eigs = es.eigenvalues();
  const double max_eig = std::max(eigs.maxCoeff(), 0.0);
  const double scale = std::max(max_eig, 1.0);
  if (eigs.minCoeff() < -1e-10 * scale)
    throw numeric_error("fpca_fit: gram matrix is not positive semi-definite");
  const double floor = 1e-12 * scale;
  const Index l = gram.rows();
  Vector sq(l), isq(l);
  for (Index i = 0; i < l; ++i) {
    const double clipped = std::max(eigs[i], floor);
    sq[i] = std::sqrt(clipped);
    isq[i] = 1.0 / sq[i];
  }
  GramRoots roots;
  roots.sqrt = symmetrized(es.eigenvectors() * sq.asDiagonal() * es.eigenvectors().transpose());
  roots.inv_sqrt =
      symmetrized(es.eigenvectors() * isq.asDiagonal() * es.eigenvectors().transpose());
  return roots;
}

/// Flip each column's sign so its largest-magnitude entry is positive
/// (first such entry on exact ties), making eigenvector signs deterministic.
inline void fix_column_signs(Matrix& m) {
  for (Index c = 0; c < m.cols(); ++c) {
    Index at = 0;
    m.col(c).cwiseAbs().maxCoeff(&at);
    if (m(at, c) < 0.0) m.col(c) = -m.col(c);
  }
}

}  // namespace detail

/// Fit per-variable FPCA on a coefficient panel. The covariance of the
/// centered coefficients is taken with a 1/n factor, so that training-data
/// score variances (also 1/n) equal the eigenvalues exactly. The eigenproblem
/// is solved for S = G^{1/2} Sigma G^{1/2}, which honors the basis geometry
/// when the basis is not orthonormal.
inline FpcaModel fpca_fit(const CoefPanel& coefs) {
  require_arg(static_cast<bool>(coefs.basis), "fpca_fit: coefficient panel has no basis");
  const Index n = coefs.n();
  if (n < 2) throw insufficient_data_error("fpca_fit: need n >= 2");

  FpcaModel model;
  model.basis = coefs.basis;
  model.gram = coefs.basis->gram;
  model.l = coefs.basis->l;
  detail::GramRoots roots = detail::gram_roots(model.gram);

  model.variables.reserve(coefs.coefs.size());
  for (const Matrix& c : coefs.coefs) {
    require_finite(c, "fpca_fit: coefficients");
    VariableFpca var;
    Eigen::RowVectorXd mean = c.colwise().mean();
    var.mean_coef = mean.transpose();
    Matrix centered = c.rowwise() - mean;
    Matrix sigma = symmetrized((centered.transpose() * centered) / static_cast<double>(n));
    Matrix s = symmetrized(roots.sqrt * sigma * roots.sqrt);
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    if (es.info() != Eigen::Success)
      throw numeric_error("fpca_fit: covariance eigensolve failed");
    // Eigen returns ascending order; flip to descending.
    Vector eigs = es.eigenvalues().reverse();
    Matrix vecs = es.eigenvectors().rowwise().reverse();
    const double scale = std::max(std::abs(eigs[0]), 1.0);
    if (eigs.minCoeff() < -1e-10 * scale)
      throw numeric_error("fpca_fit: covariance eigenvalues are significantly negative");
    var.eigenvalues = eigs.cwiseMax(0.0);
    var.loadings = roots.inv_sqrt * vecs;
    detail::fix_column_signs(var.loadings);
    model.variables.push_back(std::move(var));
  }
  return model;
}

/// Smallest M such that every variable's leading-M eigenvalue mass reaches
/// `ratio` of its total mass; all variables share the same M.
inline int choose_components(const FpcaModel& model, double ratio) {
  require_arg(ratio > 0.0 && ratio <= 1.0, "choose_components: ratio must lie in (0, 1]");
  require_arg(!model.variables.empty(), "choose_components: empty model");
  std::vector<double> totals;
  totals.reserve(model.variables.size());
  for (const VariableFpca& var : model.variables) {
    const double total = var.eigenvalues.sum();
    if (!(total > 0.0))
      throw degenerate_data_error(
          "choose_components: a variable has all-zero eigenvalues (no variance)");
    totals.push_back(total);
  }
  for (int m = 1; m <= model.l; ++m) {
    bool all_reached = true;
    for (std::size_t j = 0; j < model.variables.size(); ++j) {
      const double cum = model.variables[j].eigenvalues.head(m).sum();
      if (cum / totals[j] < ratio) {
        all_reached = false;
        break;
      }
    }
    if (all_reached) return m;
  }
  return model.l;
}

/// Project a coefficient panel onto the leading M components of a fitted
/// model: scores = (coefs - mean) G loadings[:, :M].
inline ScorePanel transform(const CoefPanel& coefs, const FpcaModel& model, int m) {
  require_arg(m >= 1, "transform: M must be >= 1");
  require_arg(m <= model.l, "transform: M must be <= L");
  require_arg(coefs.p() == model.p(), "transform: variable count mismatch");
  require_arg(coefs.l() == model.l, "transform: coefficient width mismatch");

  ScorePanel panel;
  panel.m = m;
  panel.variable_names = coefs.variable_names;
  panel.model = std::make_shared<const FpcaModel>(model);
  panel.scores.reserve(coefs.coefs.size());
  for (std::size_t j = 0; j < coefs.coefs.size(); ++j) {
    const VariableFpca& var = model.variables[j];
    Matrix centered = coefs.coefs[j].rowwise() - var.mean_coef.transpose();
    panel.scores.push_back((centered * model.gram) * var.loadings.leftCols(m));
  }
  return panel;
}

}  // namespace funclingam
