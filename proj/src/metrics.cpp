#include "amda/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <numeric>

#include "amda/error.hpp"
#include "amda/random.hpp"

namespace amda::metrics {

MetricsReport regression_metrics(std::span<const double> y_true, std::span<const double> y_pred, double unit) {
  if (y_true.size() != y_pred.size()) {
    throw DataError("metric inputs differ in length (" + std::to_string(y_true.size()) + " vs " +
                    std::to_string(y_pred.size()) + ")");
  }
  const std::size_t n = y_true.size();
  if (n < 2) throw DataError("metrics need at least two samples");
  double sum_abs = 0, sum_sq = 0, sum_y = 0, sum_y2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = y_true[i] / unit;
    const double e = y - y_pred[i] / unit;
    sum_abs += std::abs(e);
    sum_sq += e * e;
    sum_y += y;
    sum_y2 += y * y;
  }
  if (sum_y2 == 0.0) throw DataError("NDE undefined: target signal is identically zero");
  const double mean = sum_y / static_cast<double>(n);
  double ss_tot = 0;
  for (double v : y_true) ss_tot += (v / unit - mean) * (v / unit - mean);
  if (ss_tot == 0.0) throw DataError("R^2 undefined: target signal has zero variance");
  MetricsReport r;
  r.n = n;
  r.mae = sum_abs / static_cast<double>(n);
  r.mse = sum_sq / static_cast<double>(n);
  r.r2 = 1.0 - sum_sq / ss_tot;
  r.nde = sum_sq / sum_y2;
  return r;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) throw DataError("KL needs two distributions of equal, non-zero length");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(kl, 0.0);
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) throw DataError("JS needs two distributions of equal, non-zero length");
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  return std::clamp(0.5 * kl_divergence(p, m) + 0.5 * kl_divergence(q, m), 0.0, std::log(2.0));
}

DivergenceReport histogram_divergence(std::span<const double> a, std::span<const double> b, std::size_t bins,
                                      double eps) {
  if (a.empty() || b.empty()) throw DataError("divergence needs two non-empty samples");
  if (bins == 0) throw ConfigError("histogram needs at least one bin");
  if (!(eps >= 0.0)) throw ConfigError("smoothing mass must be non-negative");
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  const double lo = std::min(*amin, *bmin);
  const double hi = std::max(*amax, *bmax);
  const double width = (hi - lo) / static_cast<double>(bins);

  auto histogram = [&](std::span<const double> x) {
    std::vector<double> h(bins, 0.0);
    for (double v : x) {
      std::size_t k = width > 0.0 ? static_cast<std::size_t>((v - lo) / width) : 0;
      h[std::min(k, bins - 1)] += 1.0;
    }
    const double denom = 1.0 + static_cast<double>(bins) * eps;
    for (double& c : h) c = (c / static_cast<double>(x.size()) + eps) / denom;
    return h;
  };
  const std::vector<double> p = histogram(a);
  const std::vector<double> q = histogram(b);
  DivergenceReport r;
  r.kl = kl_divergence(p, q);
  r.kl_reverse = kl_divergence(q, p);
  r.js = js_divergence(p, q);
  r.bins = bins;
  r.smoothing_eps = eps;
  return r;
}

std::vector<double> fractional_ranks(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(values.size());
  for (std::size_t s = 0; s < idx.size();) {
    std::size_t e = s + 1;
    while (e < idx.size() && values[idx[e]] == values[idx[s]]) ++e;
    const double r = 0.5 * static_cast<double>(s + 1 + e);  // mean of ranks s+1 .. e
    for (std::size_t t = s; t < e; ++t) ranks[idx[t]] = r;
    s = e;
  }
  return ranks;
}

double nemenyi_q(std::size_t k, double alpha) {
  static constexpr std::array<double, 9> q05{1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164};
  static constexpr std::array<double, 9> q10{1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920};
  if (k < 2 || k > 10) throw ConfigError("Nemenyi table covers 2..10 methods, got " + std::to_string(k));
  if (std::abs(alpha - 0.05) < 1e-12) return q05[k - 2];
  if (std::abs(alpha - 0.10) < 1e-12) return q10[k - 2];
  throw ConfigError("Nemenyi table covers alpha 0.05 and 0.10 only");
}

double nemenyi_critical_difference(std::size_t k, std::size_t n_blocks, double alpha) {
  const double kk = static_cast<double>(k);
  return nemenyi_q(k, alpha) * std::sqrt(kk * (kk + 1.0) / (6.0 * static_cast<double>(n_blocks)));
}

RankReport friedman_nemenyi(const std::vector<std::vector<double>>& scores, double alpha,
                            std::vector<std::string> methods) {
  const std::size_t k = scores.size();
  if (k < 3) throw DataError("Friedman test needs at least 3 methods");
  const std::size_t n = scores.front().size();
  if (n < 2) throw DataError("Friedman test needs at least 2 blocks");
  for (const auto& row : scores) {
    if (row.size() != n) throw DataError("score matrix is ragged");
  }
  if (methods.empty()) {
    for (std::size_t m = 0; m < k; ++m) methods.push_back("method" + std::to_string(m));
  }
  if (methods.size() != k) throw DataError("method names do not match the score matrix");

  RankReport r;
  r.methods = std::move(methods);
  r.average_rank.assign(k, 0.0);
  r.alpha = alpha;
  r.n_blocks = n;
  std::vector<double> block(k);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t m = 0; m < k; ++m) block[m] = scores[m][b];
    const std::vector<double> ranks = fractional_ranks(block);
    for (std::size_t m = 0; m < k; ++m) r.average_rank[m] += ranks[m];
  }
  const double kk = static_cast<double>(k);
  const double nn = static_cast<double>(n);
  double sum_sq = 0.0;
  for (double& rank : r.average_rank) {
    rank /= nn;
    sum_sq += rank * rank;
  }
  r.friedman_statistic = 12.0 * nn / (kk * (kk + 1.0)) * (sum_sq - kk * (kk + 1.0) * (kk + 1.0) / 4.0);
  r.friedman_statistic = std::max(r.friedman_statistic, 0.0);
  const boost::math::chi_squared chi2(kk - 1.0);
  r.p_value = boost::math::cdf(boost::math::complement(chi2, r.friedman_statistic));
  r.critical_difference = nemenyi_critical_difference(k, n, alpha);
  r.significant.assign(k, std::vector<bool>(k, false));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      r.significant[i][j] = std::abs(r.average_rank[i] - r.average_rank[j]) > r.critical_difference;
    }
  }
  return r;
}

namespace {

using MatrixXd = Eigen::MatrixXd;
using VectorXd = Eigen::VectorXd;

// Dominant eigenpair of a symmetric PSD matrix; orthogonal to `exclude`.
std::pair<double, VectorXd> power_iteration(const MatrixXd& cov, const VectorXd* exclude) {
  const Eigen::Index d = cov.rows();
  Rng rng(0x5ca1ab1eULL);
  VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = rng.uniform(-1.0, 1.0);
  if (exclude) v -= exclude->dot(v) * *exclude;
  v.normalize();
  double lambda = 0.0;
  constexpr int kMaxIterations = 100000;
  for (int it = 0; it < kMaxIterations; ++it) {
    VectorXd w = cov * v;
    if (exclude) w -= exclude->dot(w) * *exclude;
    const double norm = w.norm();
    if (norm < 1e-300) return {0.0, v};
    w /= norm;
    const double delta = std::min((w - v).norm(), (w + v).norm());
    v = std::move(w);
    lambda = v.dot(cov * v);
    if (delta < kPowerIterationTolerance) break;
  }
  return {lambda, v};
}

void fix_sign(VectorXd& v) {
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v[arg] < 0) v = -v;
}

}  // namespace

PcaProjection pca_project_2d(std::span<const double> rows, std::size_t n_cols) {
  if (n_cols == 0 || rows.size() % n_cols != 0) throw DataError("PCA input is not a whole number of rows");
  const std::size_t n = rows.size() / n_cols;
  if (n < 2) throw DataError("PCA needs at least two rows");
  const auto d = static_cast<Eigen::Index>(n_cols);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(
      rows.data(), static_cast<Eigen::Index>(n), d);
  const VectorXd mean = X.colwise().mean().transpose();
  const MatrixXd centered = X.rowwise() - mean.transpose();
  const MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  if (!(cov.trace() > 0.0)) throw DataError("PCA input has zero variance");

  auto [l1, v1] = power_iteration(cov, nullptr);
  fix_sign(v1);
  MatrixXd deflated = cov - l1 * v1 * v1.transpose();
  auto [l2, v2] = power_iteration(deflated, &v1);
  fix_sign(v2);

  PcaProjection p;
  p.mean.assign(mean.data(), mean.data() + d);
  p.eigenvalues = {l1, std::max(l2, 0.0)};
  p.components[0].assign(v1.data(), v1.data() + d);
  p.components[1].assign(v2.data(), v2.data() + d);
  p.coordinates = pca_apply(p, rows);
  return p;
}

std::vector<std::array<double, 2>> pca_apply(const PcaProjection& fit, std::span<const double> rows) {
  const std::size_t d = fit.mean.size();
  if (d == 0 || rows.size() % d != 0) throw DataError("PCA rows do not match the fitted dimension");
  std::vector<std::array<double, 2>> out(rows.size() / d);
  for (std::size_t r = 0; r < out.size(); ++r) {
    double c0 = 0, c1 = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const double x = rows[r * d + j] - fit.mean[j];
      c0 += x * fit.components[0][j];
      c1 += x * fit.components[1][j];
    }
    out[r] = {c0, c1};
  }
  return out;
}

}  // namespace amda::metrics
