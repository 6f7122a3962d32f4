#pragma once

// Regression metrics, histogram divergences, Friedman / Nemenyi ranking and
// a two-component PCA projection.

#include <array>
#include <span>
#include <string>
#include <vector>

namespace amda::metrics {

struct MetricsReport {
  double mae = 0;  // in `unit`
  double mse = 0;  // in `unit`^2
  double r2 = 0;
  double nde = 0;
  std::size_t n = 0;
};

inline constexpr double kWattsPerMegawatt = 1e6;

/// Inputs in watts; MAE and MSE are reported in watts / `unit` (MW by
/// default). NDE = sum (y - yhat)^2 / sum y^2. Throws DataError on length
/// mismatch, n < 2, sum y^2 = 0 or zero variance of y.
MetricsReport regression_metrics(std::span<const double> y_true, std::span<const double> y_pred,
                                 double unit = kWattsPerMegawatt);

inline constexpr std::size_t kDefaultBins = 100;
inline constexpr double kDefaultSmoothing = 1e-8;

/// KL(P || Q) in nats over discrete distributions of equal length.
double kl_divergence(std::span<const double> p, std::span<const double> q);
/// Jensen-Shannon divergence in nats, bounded by ln 2.
double js_divergence(std::span<const double> p, std::span<const double> q);

struct DivergenceReport {
  double kl = 0;          // KL(a || b)
  double kl_reverse = 0;  // KL(b || a)
  double js = 0;
  std::size_t bins = 0;
  double smoothing_eps = 0;
};

/// Equal-width histograms over the pooled range of a and b. Each bin gets
/// `eps` extra mass before renormalization: P' = (P + eps) / (1 + bins eps).
/// Throws DataError for empty input.
DivergenceReport histogram_divergence(std::span<const double> a, std::span<const double> b,
                                      std::size_t bins = kDefaultBins, double eps = kDefaultSmoothing);

/// Fractional (average) ranks, 1 = smallest value.
std::vector<double> fractional_ranks(std::span<const double> values);

/// Two-tailed Nemenyi q_alpha for k = 2..10 methods, alpha in {0.05, 0.10}.
/// Throws ConfigError outside the table.
double nemenyi_q(std::size_t k, double alpha);
double nemenyi_critical_difference(std::size_t k, std::size_t n_blocks, double alpha);

struct RankReport {
  std::vector<std::string> methods;
  std::vector<double> average_rank;
  double friedman_statistic = 0;
  double p_value = 1;
  double alpha = 0.05;
  double critical_difference = 0;
  std::size_t n_blocks = 0;
  /// significant[i][j]: |rank_i - rank_j| > CD.
  std::vector<std::vector<bool>> significant;
};

/// `scores[m][b]` is method m's score on block b; lower is better. Throws
/// DataError for k < 3, N < 2 or a ragged matrix.
RankReport friedman_nemenyi(const std::vector<std::vector<double>>& scores, double alpha = 0.05,
                            std::vector<std::string> methods = {});

struct PcaProjection {
  std::vector<std::array<double, 2>> coordinates;  // one row per input row
  std::array<std::vector<double>, 2> components;   // unit principal axes
  std::array<double, 2> eigenvalues{};             // covariance eigenvalues
  std::vector<double> mean;
};

inline constexpr double kPowerIterationTolerance = 1e-9;

/// Projects rows (n_rows x n_cols, row-major) onto the top two principal
/// axes found by power iteration with deflation. Each axis is signed so its
/// largest-magnitude loading is positive. Throws DataError for fewer than two
/// rows or zero variance.
PcaProjection pca_project_2d(std::span<const double> rows, std::size_t n_cols);

/// Projects further rows with an existing fit.
std::vector<std::array<double, 2>> pca_apply(const PcaProjection& fit, std::span<const double> rows);

}  // namespace amda::metrics
