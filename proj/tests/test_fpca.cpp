#include "oracles.hpp"

#include <funclingam/funclingam.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <random>

namespace fl = funclingam;
using fl::Index;
using fl::Matrix;
using fl::Vector;

namespace {

/// A hand-built basis whose Gram matrix is exactly the identity, so the
/// Gram-corrected eigenproblem reduces to plain PCA on the coefficients.
std::shared_ptr<const fl::BasisSystem> identity_basis(int l) {
  fl::BasisSystem basis;
  basis.kind = fl::BasisKind::fourier;
  basis.l = l;
  basis.harmonics = l;
  basis.grid = fl::build_time_grid(std::max(2 * l, 8));
  basis.eval = Matrix::Zero(basis.grid.w(), l);  // unused by fpca_fit
  basis.gram = Matrix::Identity(l, l);
  return std::make_shared<const fl::BasisSystem>(std::move(basis));
}

fl::CoefPanel coef_panel(std::shared_ptr<const fl::BasisSystem> basis,
                         const std::vector<Matrix>& coefs) {
  fl::CoefPanel panel;
  panel.basis = std::move(basis);
  panel.variable_names = fl::default_variable_names(static_cast<int>(coefs.size()));
  panel.coefs = coefs;
  return panel;
}

}  // namespace

TEST_CASE("rank-one two-sample panel gives eigenvalues (1, 0) and first axis") {
  Matrix c(2, 2);
  c << 1.0, 0.0, -1.0, 0.0;
  const fl::CoefPanel panel = coef_panel(identity_basis(2), {c, c});
  const fl::FpcaModel model = fl::fpca_fit(panel);
  for (int j = 0; j < 2; ++j) {
    const fl::VariableFpca& var = model.variables[static_cast<std::size_t>(j)];
    REQUIRE(var.eigenvalues(0) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(var.eigenvalues(1) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(std::abs(var.loadings(0, 0)) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(std::abs(var.loadings(1, 0)) <= 1e-12);
    // Sign convention: the largest-magnitude entry of each loading is positive.
    REQUIRE(var.loadings(0, 0) > 0.0);
  }
}

TEST_CASE("diagonal covariance with identity gram yields its diagonal as eigenvalues") {
  // Coefficients whose 1/n covariance is exactly diag(2, 1).
  const double a = std::sqrt(2.0), b = 1.0;
  Matrix c(4, 2);
  c << a, b, a, -b, -a, b, -a, -b;
  const fl::CoefPanel panel = coef_panel(identity_basis(2), {c, c});
  const fl::FpcaModel model = fl::fpca_fit(panel);
  const fl::VariableFpca& var = model.variables[0];
  REQUIRE(var.eigenvalues(0) == Catch::Approx(2.0).margin(1e-12));
  REQUIRE(var.eigenvalues(1) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("fpca_fit requires at least two samples") {
  Matrix c(1, 2);
  c << 1.0, 0.0;
  const fl::CoefPanel panel = coef_panel(identity_basis(2), {c, c});
  REQUIRE_THROWS_AS(fl::fpca_fit(panel), fl::insufficient_data_error);
}

TEST_CASE("generator output concentrates its spectrum on five components") {
  fl::SynthConfig config;
  config.n = 300;
  config.p = 5;
  config.w = 300;
  config.seed = 11;
  const fl::CurvePanel panel = fl::generate(config).first;
  const fl::BasisSystem basis = fl::bspline_basis(panel.grid, 20, 4);
  const fl::CoefPanel coefs = fl::fit_coefficients(panel, basis);
  const fl::FpcaModel model = fl::fpca_fit(coefs);
  for (const fl::VariableFpca& var : model.variables) {
    const double total = var.eigenvalues.sum();
    const double leading = var.eigenvalues.head(5).sum();
    REQUIRE(leading / total >= 0.99);
  }
  REQUIRE(fl::choose_components(model, 0.99) == 5);
}

TEST_CASE("choose_components picks the smallest M meeting the worst-variable ratio") {
  fl::FpcaModel model;
  model.l = 3;
  model.gram = Matrix::Identity(3, 3);
  fl::VariableFpca var;
  var.mean_coef = Vector::Zero(3);
  var.loadings = Matrix::Identity(3, 3);

  var.eigenvalues = Vector(3);
  var.eigenvalues << 1.0, 0.0, 0.0;
  model.variables = {var, var};
  REQUIRE(fl::choose_components(model, 0.99) == 1);

  var.eigenvalues << 0.5, 0.3, 0.2;
  model.variables = {var, var};
  REQUIRE(fl::choose_components(model, 0.75) == 2);

  // The minimum over variables governs: one variable needing 3 components
  // forces M = 3 even if the other is rank 1.
  fl::VariableFpca spread = var;
  spread.eigenvalues << 0.4, 0.35, 0.25;
  fl::VariableFpca tight = var;
  tight.eigenvalues << 1.0, 0.0, 0.0;
  model.variables = {spread, tight};
  REQUIRE(fl::choose_components(model, 0.9) == 3);

  REQUIRE_THROWS_AS(fl::choose_components(model, 0.0), fl::invalid_argument_error);
  REQUIRE_THROWS_AS(fl::choose_components(model, 1.5), fl::invalid_argument_error);

  fl::VariableFpca zero = var;
  zero.eigenvalues << 0.0, 0.0, 0.0;
  model.variables = {zero, zero};
  REQUIRE_THROWS_AS(fl::choose_components(model, 0.99), fl::degenerate_data_error);
}

TEST_CASE("loadings are orthonormal in the Gram inner product") {
  fl::SynthConfig config;
  config.n = 80;
  config.p = 3;
  config.w = 150;
  config.seed = 5;
  const fl::CurvePanel panel = fl::generate(config).first;
  const fl::BasisSystem basis = fl::bspline_basis(panel.grid, 12, 4);
  const fl::CoefPanel coefs = fl::fit_coefficients(panel, basis);
  const fl::FpcaModel model = fl::fpca_fit(coefs);
  for (const fl::VariableFpca& var : model.variables)
    REQUIRE(oracles::gram_orthonormality_defect(var.loadings, basis.gram) <= 1e-8);
}

TEST_CASE("training-data scores are centered with variances equal to eigenvalues") {
  fl::SynthConfig config;
  config.n = 120;
  config.p = 3;
  config.w = 200;
  config.seed = 42;
  const fl::CurvePanel panel = fl::generate(config).first;
  const fl::BasisSystem basis = fl::bspline_basis(panel.grid, 15, 4);
  const fl::CoefPanel coefs = fl::fit_coefficients(panel, basis);
  const fl::FpcaModel model = fl::fpca_fit(coefs);
  const int m = 6;
  const fl::ScorePanel scores = fl::transform(coefs, model, m);
  REQUIRE(scores.m == m);
  for (int j = 0; j < 3; ++j) {
    const Matrix& s = scores.scores[static_cast<std::size_t>(j)];
    REQUIRE(s.rows() == config.n);
    REQUIRE(s.cols() == m);
    for (int c = 0; c < m; ++c) REQUIRE(std::abs(s.col(c).mean()) <= 1e-8);
    // 1/n score covariance diagonal should reproduce the eigenvalues.
    const Matrix cov = oracles::loop_covariance(s);
    const Vector eigs = model.variables[static_cast<std::size_t>(j)].eigenvalues.head(m);
    for (int c = 0; c < m; ++c) {
      if (eigs(c) > 1e-10)
        REQUIRE(std::abs(cov(c, c) - eigs(c)) <= 1e-6 * eigs(c));
      // Distinct components should also be uncorrelated on training data.
      for (int d = 0; d < c; ++d) REQUIRE(std::abs(cov(c, d)) <= 1e-8 * std::max(1.0, eigs(0)));
    }
  }
}

TEST_CASE("zero-variance variables produce all-zero scores") {
  Matrix varying(5, 2);
  varying << 1, 0, 2, 1, 3, -1, 4, 0.5, 5, -0.5;
  const Matrix constant = Matrix::Constant(5, 2, 2.5);
  const fl::CoefPanel panel = coef_panel(identity_basis(2), {varying, constant});
  const fl::FpcaModel model = fl::fpca_fit(panel);
  const fl::ScorePanel scores = fl::transform(panel, model, 2);
  REQUIRE(scores.scores[1].cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("transform rejects M outside [1, L]") {
  Matrix c(3, 2);
  c << 1, 0, 0, 1, -1, -1;
  const fl::CoefPanel panel = coef_panel(identity_basis(2), {c, c});
  const fl::FpcaModel model = fl::fpca_fit(panel);
  REQUIRE_THROWS_AS(fl::transform(panel, model, 3), fl::invalid_argument_error);
  REQUIRE_THROWS_AS(fl::transform(panel, model, 0), fl::invalid_argument_error);
}

TEST_CASE("curves rebuilt from five scores lose less than one percent energy") {
  fl::SynthConfig config;
  config.n = 150;
  config.p = 3;
  config.w = 1000;
  config.seed = 9;
  const fl::CurvePanel panel = fl::generate(config).first;
  const fl::BasisSystem basis = fl::bspline_basis(panel.grid, 20, 4);
  const fl::CoefPanel coefs = fl::fit_coefficients(panel, basis);
  const fl::FpcaModel model = fl::fpca_fit(coefs);
  const int m = 5;
  const fl::ScorePanel scores = fl::transform(coefs, model, m);

  // Reconstruction oracle: G-orthonormality of the loadings B makes B_M s + mean
  // the pseudo-inverse rebuild of the smoothed curve from its M scores. Compare
  // curve energies pointwise on the grid with trapezoid weights.
  const Vector quad = fl::trapezoid_weights(panel.grid);
  double err = 0.0, total = 0.0;
  for (int j = 0; j < config.p; ++j) {
    const fl::VariableFpca& var = model.variables[static_cast<std::size_t>(j)];
    const Matrix& c = coefs.coefs[static_cast<std::size_t>(j)];
    const Matrix rebuilt_coef =
        (scores.scores[static_cast<std::size_t>(j)] * var.loadings.leftCols(m).transpose())
            .rowwise() +
        var.mean_coef.transpose();
    const Matrix diff_curves = (c - rebuilt_coef) * basis.eval.transpose();
    const Matrix full_curves = c * basis.eval.transpose();
    err += (diff_curves * quad.cwiseSqrt().asDiagonal()).squaredNorm();
    total += (full_curves * quad.cwiseSqrt().asDiagonal()).squaredNorm();
  }
  REQUIRE(err <= 0.01 * 0.01 * total);  // relative L2 error <= 1% over the panel
}

TEST_CASE("eigenvalue spectrum is invariant under orthogonal coefficient rotations") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int l = 4, n = 60;
  Matrix c(n, l);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < l; ++k) c(i, k) = gauss(rng) * static_cast<double>(k + 1);

  // Random orthogonal map from the QR factorization of a Gaussian matrix.
  Matrix raw(l, l);
  for (Index i = 0; i < l; ++i)
    for (Index k = 0; k < l; ++k) raw(i, k) = gauss(rng);
  const Matrix q = Eigen::HouseholderQR<Matrix>(raw).householderQ();

  const fl::CoefPanel base = coef_panel(identity_basis(l), {c, c});
  const fl::CoefPanel rotated = coef_panel(identity_basis(l), {Matrix(c * q.transpose()), c});
  const Vector eig_base = fl::fpca_fit(base).variables[0].eigenvalues;
  const Vector eig_rot = fl::fpca_fit(rotated).variables[0].eigenvalues;
  REQUIRE((eig_base - eig_rot).cwiseAbs().maxCoeff() <= 1e-8);
}
