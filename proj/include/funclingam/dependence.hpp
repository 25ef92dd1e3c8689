#pragma once

#include "funclingam/common.hpp"

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace funclingam {

/// A dependence statistic together with the kernel bandwidths it was computed
/// at. For degenerate (constant) arguments the statistic is exactly 0 and the
/// corresponding bandwidth is reported as 1.
struct DependenceStat {
  double value = 0.0;
  std::string measure_name;
  double bandwidth_x = 1.0;
  double bandwidth_y = 1.0;
};

namespace detail {

inline void validate_sample_matrix(const Matrix& x, const char* context) {
  require_arg(x.cols() >= 1, std::string(context) + ": needs at least one column");
  if (x.rows() < 1) throw insufficient_data_error(std::string(context) + ": empty sample");
  require_finite(x, context);
}

inline bool all_rows_identical(const Matrix& x) {
  for (Index i = 1; i < x.rows(); ++i)
    if ((x.row(i) - x.row(0)).cwiseAbs().maxCoeff() != 0.0) return false;
  return true;
}

/// First `count` entries of a seeded partial Fisher-Yates shuffle of 0..n-1,
/// returned sorted so the subsample preserves the original row order.
inline std::vector<Index> subsample_indices(Index n, std::size_t count, std::uint64_t seed) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, static_cast<std::size_t>(n) - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline Matrix take_rows(const Matrix& x, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(rows[i]);
  return out;
}

inline Matrix squared_distance_matrix(const Matrix& x) {
  const Index n = x.rows();
  Vector sq = x.rowwise().squaredNorm();
  Matrix d = sq.replicate(1, n) + sq.transpose().replicate(n, 1) - 2.0 * (x * x.transpose());
  return d.cwiseMax(0.0);
}

inline Matrix gaussian_kernel(const Matrix& x, double bandwidth) {
  Matrix d = squared_distance_matrix(x);
  return (-d / (2.0 * bandwidth * bandwidth)).array().exp().matrix();
}

/// K -> H K H with H = I - 11^T / n (double centering).
inline Matrix center_kernel(const Matrix& k) {
  Vector row_means = k.rowwise().mean();
  Eigen::RowVectorXd col_means = k.colwise().mean();
  const double grand_mean = row_means.mean();
  Matrix centered = k;
  centered.colwise() -= row_means;
  centered.rowwise() -= col_means;
  centered.array() += grand_mean;
  return centered;
}

inline double hsic_from_kernels(const Matrix& centered_k, const Matrix& l) {
  const double n = static_cast<double>(centered_k.rows());
  const double value = centered_k.cwiseProduct(l).sum() / (n * n);
  return std::max(value, 0.0);
}

}  // namespace detail

/// Median of the pairwise Euclidean distances between distinct rows (the
/// average of the two middle distances for an even pair count).
inline double median_bandwidth(const Matrix& x) {
  detail::validate_sample_matrix(x, "median_bandwidth");
  const Index n = x.rows();
  if (n < 2) throw insufficient_data_error("median_bandwidth: need at least two rows");
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n) * (static_cast<std::size_t>(n) - 1) / 2);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) dist.push_back((x.row(i) - x.row(j)).norm());
  const std::size_t count = dist.size();
  const std::size_t upper = count / 2;
  double median;
  if (count % 2 == 1) {
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(upper), dist.end());
    median = dist[upper];
  } else {
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(upper), dist.end());
    const double hi = dist[upper];
    const double lo = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(upper));
    median = 0.5 * (lo + hi);
  }
  if (!(median > 0.0))
    throw degenerate_data_error(
        "median_bandwidth: median pairwise distance is zero (too many identical rows)");
  return median;
}

/// HSIC with explicit Gaussian-kernel bandwidths: the biased V-statistic
/// (1/n^2) trace(K H L H). No subsampling is applied on this overload.
inline DependenceStat hsic_with_bandwidth(const Matrix& x, const Matrix& y, double bandwidth_x,
                                          double bandwidth_y) {
  detail::validate_sample_matrix(x, "hsic");
  detail::validate_sample_matrix(y, "hsic");
  require_arg(x.rows() == y.rows(), "hsic: X and Y must have the same number of rows");
  require_arg(bandwidth_x > 0.0 && bandwidth_y > 0.0, "hsic: bandwidths must be positive");
  if (x.rows() < 4) throw insufficient_data_error("hsic: need n >= 4");
  Matrix centered_k = detail::center_kernel(detail::gaussian_kernel(x, bandwidth_x));
  Matrix l = detail::gaussian_kernel(y, bandwidth_y);
  DependenceStat stat;
  stat.measure_name = "hsic";
  stat.bandwidth_x = bandwidth_x;
  stat.bandwidth_y = bandwidth_y;
  stat.value = detail::hsic_from_kernels(centered_k, l);
  return stat;
}

/// HSIC at median-heuristic bandwidths. Rows above `subsample_limit` are
/// jointly subsampled (same seeded row subset for X and Y) before kernel
/// construction. A constant argument yields exactly 0 (its centered kernel
/// vanishes), reported with a placeholder bandwidth of 1.
inline DependenceStat hsic(const Matrix& x_in, const Matrix& y_in,
                           std::size_t subsample_limit = 2000, std::uint64_t seed = 0) {
  detail::validate_sample_matrix(x_in, "hsic");
  detail::validate_sample_matrix(y_in, "hsic");
  require_arg(x_in.rows() == y_in.rows(), "hsic: X and Y must have the same number of rows");
  require_arg(subsample_limit >= 4, "hsic: subsample limit must be >= 4");
  if (x_in.rows() < 4) throw insufficient_data_error("hsic: need n >= 4");

  Matrix x = x_in, y = y_in;
  if (static_cast<std::size_t>(x.rows()) > subsample_limit) {
    std::vector<Index> rows = detail::subsample_indices(x.rows(), subsample_limit, seed);
    x = detail::take_rows(x_in, rows);
    y = detail::take_rows(y_in, rows);
  }

  DependenceStat stat;
  stat.measure_name = "hsic";
  const bool x_const = detail::all_rows_identical(x);
  const bool y_const = detail::all_rows_identical(y);
  if (x_const || y_const) {
    stat.value = 0.0;
    stat.bandwidth_x = x_const ? 1.0 : median_bandwidth(x);
    stat.bandwidth_y = y_const ? 1.0 : median_bandwidth(y);
    return stat;
  }
  stat.bandwidth_x = median_bandwidth(x);
  stat.bandwidth_y = median_bandwidth(y);
  Matrix centered_k = detail::center_kernel(detail::gaussian_kernel(x, stat.bandwidth_x));
  Matrix l = detail::gaussian_kernel(y, stat.bandwidth_y);
  stat.value = detail::hsic_from_kernels(centered_k, l);
  return stat;
}

/// Permutation p-value (1 + #{b : HSIC(X, pi_b(Y)) >= HSIC(X, Y)}) / (B + 1).
/// Permutation b uses its own generator seeded with seed + b; bandwidths are
/// computed once on the (possibly subsampled) inputs and are permutation
/// invariant. Deterministic given the seed.
inline double hsic_pvalue(const Matrix& x_in, const Matrix& y_in, int permutations,
                          std::uint64_t seed, std::size_t subsample_limit = 2000) {
  require_arg(permutations >= 50, "hsic_pvalue: need at least 50 permutations");
  detail::validate_sample_matrix(x_in, "hsic_pvalue");
  detail::validate_sample_matrix(y_in, "hsic_pvalue");
  require_arg(x_in.rows() == y_in.rows(),
              "hsic_pvalue: X and Y must have the same number of rows");
  require_arg(subsample_limit >= 4, "hsic_pvalue: subsample limit must be >= 4");
  if (x_in.rows() < 4) throw insufficient_data_error("hsic_pvalue: need n >= 4");

  Matrix x = x_in, y = y_in;
  if (static_cast<std::size_t>(x.rows()) > subsample_limit) {
    std::vector<Index> rows = detail::subsample_indices(x.rows(), subsample_limit, seed);
    x = detail::take_rows(x_in, rows);
    y = detail::take_rows(y_in, rows);
  }
  if (detail::all_rows_identical(x) || detail::all_rows_identical(y)) {
    // Statistic is identically zero under every permutation.
    return 1.0;
  }

  const double bw_x = median_bandwidth(x);
  const double bw_y = median_bandwidth(y);
  Matrix centered_k = detail::center_kernel(detail::gaussian_kernel(x, bw_x));
  Matrix l = detail::gaussian_kernel(y, bw_y);
  const Index n = x.rows();
  const double observed = detail::hsic_from_kernels(centered_k, l);

  std::vector<Index> perm(static_cast<std::size_t>(n));
  Matrix permuted(n, n);
  int at_least = 0;
  for (int b = 1; b <= permutations; ++b) {
    std::iota(perm.begin(), perm.end(), Index{0});
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(b));
    std::shuffle(perm.begin(), perm.end(), rng);
    for (Index j = 0; j < n; ++j) {
      const Index pj = perm[static_cast<std::size_t>(j)];
      for (Index i = 0; i < n; ++i) permuted(i, j) = l(perm[static_cast<std::size_t>(i)], pj);
    }
    if (detail::hsic_from_kernels(centered_k, permuted) >= observed) ++at_least;
  }
  return (1.0 + at_least) / (static_cast<double>(permutations) + 1.0);
}

/// Pluggable dependence measure used by the discovery loop.
class DependenceMeasure {
 public:
  virtual ~DependenceMeasure() = default;
  virtual DependenceStat operator()(const Matrix& x, const Matrix& y) const = 0;
  virtual const std::string& name() const = 0;
};

class GaussianHsic final : public DependenceMeasure {
 public:
  explicit GaussianHsic(std::size_t subsample_limit = 2000, std::uint64_t seed = 0)
      : subsample_limit_(subsample_limit), seed_(seed), name_("hsic") {
    require_arg(subsample_limit_ >= 4, "GaussianHsic: subsample limit must be >= 4");
  }

  DependenceStat operator()(const Matrix& x, const Matrix& y) const override {
    return hsic(x, y, subsample_limit_, seed_);
  }

  const std::string& name() const override { return name_; }

 private:
  std::size_t subsample_limit_;
  std::uint64_t seed_;
  std::string name_;
};

inline std::unique_ptr<DependenceMeasure> make_measure(const std::string& name,
                                                       std::size_t subsample_limit = 2000,
                                                       std::uint64_t seed = 0) {
  if (name == "hsic") return std::make_unique<GaussianHsic>(subsample_limit, seed);
  throw invalid_argument_error("make_measure: unknown dependence measure '" + name + "'");
}

}  // namespace funclingam
