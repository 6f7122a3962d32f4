#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "amda/error.hpp"
#include "amda/metrics.hpp"
#include "doctest.h"

using namespace amda;
using namespace amda::metrics;

namespace {

std::vector<double> gaussian(std::size_t n, std::uint64_t seed, double mean = 0.0, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(mean, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("regression metrics: hand-computed example") {
  const std::vector<double> y{1e6, 2e6, 3e6};
  const std::vector<double> p{2e6, 2e6, 2e6};
  const MetricsReport r = regression_metrics(y, p);
  CHECK(r.mae == doctest::Approx(2.0 / 3.0));
  CHECK(r.mse == doctest::Approx(2.0 / 3.0));
  CHECK(r.r2 == doctest::Approx(0.0));
  CHECK(r.nde == doctest::Approx(2.0 / 14.0));
  CHECK(r.n == 3);
  // Watts as the unit.
  CHECK(regression_metrics(y, p, 1.0).mae == doctest::Approx(2e6 / 3.0));
}

TEST_CASE("regression metrics: perfect and zero predictors") {
  const auto y = gaussian(200, 1, 5e5, 1e5);
  const MetricsReport perfect = regression_metrics(y, y);
  CHECK(perfect.mae == 0.0);
  CHECK(perfect.mse == 0.0);
  CHECK(perfect.r2 == 1.0);
  CHECK(perfect.nde == 0.0);
  const MetricsReport zero = regression_metrics(y, std::vector<double>(y.size(), 0.0));
  CHECK(zero.nde == doctest::Approx(1.0).epsilon(1e-15));

  double mean = 0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  CHECK(regression_metrics(y, std::vector<double>(y.size(), mean)).r2 == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("regression metrics: scale and permutation invariance") {
  const auto y = gaussian(300, 2, 1e5, 3e5);
  const auto p = gaussian(300, 3, 1e5, 3e5);
  const MetricsReport base = regression_metrics(y, p);
  for (double c : {-2.0, 0.5, 1e3}) {
    std::vector<double> cy(y), cp(p);
    for (auto& v : cy) v *= c;
    for (auto& v : cp) v *= c;
    CHECK(regression_metrics(cy, cp).nde == doctest::Approx(base.nde).epsilon(1e-12));
    CHECK(regression_metrics(cy, cp).r2 == doctest::Approx(base.r2).epsilon(1e-12));
  }
  std::vector<std::size_t> perm(y.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(4));
  std::vector<double> py, pp;
  for (std::size_t i : perm) {
    py.push_back(y[i]);
    pp.push_back(p[i]);
  }
  const MetricsReport shuffled = regression_metrics(py, pp);
  CHECK(shuffled.mae == doctest::Approx(base.mae).epsilon(1e-12));
  CHECK(shuffled.nde == doctest::Approx(base.nde).epsilon(1e-12));
  CHECK(base.mae >= 0);
  CHECK(base.mse >= 0);
  CHECK(base.r2 <= 1);
}

TEST_CASE("regression metrics: errors") {
  const std::vector<double> a{1, 2, 3};
  CHECK_THROWS_AS(regression_metrics(a, std::vector<double>{1, 2}), DataError);
  CHECK_THROWS_AS(regression_metrics(std::vector<double>{1}, std::vector<double>{1}), DataError);
  CHECK_THROWS_AS(regression_metrics(std::vector<double>{0, 0, 0}, a), DataError);
  CHECK_THROWS_AS(regression_metrics(std::vector<double>{4, 4, 4}, a), DataError);
}

TEST_CASE("KL and JS on discrete distributions") {
  const std::vector<double> p{0.75, 0.25}, q{0.5, 0.5};
  CHECK(kl_divergence(p, q) == doctest::Approx(0.75 * std::log(1.5) + 0.25 * std::log(0.5)));
  CHECK(kl_divergence(p, q) == doctest::Approx(0.1308).epsilon(1e-3));
  CHECK(kl_divergence(p, p) == 0.0);
  CHECK(js_divergence(p, q) == doctest::Approx(js_divergence(q, p)));
  // JS by definition through the mixture.
  const std::vector<double> m{0.625, 0.375};
  CHECK(js_divergence(p, q) == doctest::Approx(0.5 * kl_divergence(p, m) + 0.5 * kl_divergence(q, m)));
  CHECK(js_divergence(std::vector<double>{1, 0}, std::vector<double>{0, 1}) ==
        doctest::Approx(std::numbers::ln2));
}

TEST_CASE("histogram divergence properties") {
  const auto a = gaussian(5000, 1);
  const DivergenceReport same = histogram_divergence(a, a);
  CHECK(same.kl == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(same.js == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(same.bins == kDefaultBins);
  CHECK(same.smoothing_eps == kDefaultSmoothing);

  const auto far = gaussian(5000, 2, 100.0);
  const DivergenceReport disjoint = histogram_divergence(a, far, 100, 1e-12);
  CHECK(disjoint.js <= std::numbers::ln2);
  CHECK(disjoint.js == doctest::Approx(std::numbers::ln2).epsilon(1e-6));

  for (std::uint64_t seed = 3; seed < 13; ++seed) {
    const auto b = gaussian(2000, seed, 0.3 * static_cast<double>(seed - 3), 1.0 + 0.1 * static_cast<double>(seed));
    const DivergenceReport ab = histogram_divergence(a, b);
    const DivergenceReport ba = histogram_divergence(b, a);
    CHECK(ab.kl >= 0.0);
    CHECK(ab.kl_reverse >= 0.0);
    CHECK(ab.js >= 0.0);
    CHECK(ab.js <= std::numbers::ln2);
    CHECK(ab.js == doctest::Approx(ba.js).epsilon(1e-12));
    CHECK(ab.kl == doctest::Approx(ba.kl_reverse).epsilon(1e-12));
  }
  CHECK_THROWS_AS(histogram_divergence(std::vector<double>{}, a), DataError);
}

TEST_CASE("histogram divergence: two-bin oracle") {
  // Range [0, 1], two bins split at 0.5: a -> (3/4, 1/4), b -> (1/2, 1/2).
  const std::vector<double> a{0.0, 0.1, 0.2, 1.0};
  const std::vector<double> b{0.0, 0.2, 0.9, 1.0};
  const DivergenceReport r = histogram_divergence(a, b, 2, 0.0);
  CHECK(r.kl == doctest::Approx(0.75 * std::log(1.5) + 0.25 * std::log(0.5)));
}

TEST_CASE("fractional ranks") {
  const auto r = fractional_ranks(std::vector<double>{3.0, 1.0, 2.0, 2.0});
  CHECK(r == std::vector<double>{4.0, 1.0, 2.5, 2.5});
  const auto t = fractional_ranks(std::vector<double>{5, 5, 5});
  CHECK(t == std::vector<double>{2.0, 2.0, 2.0});
}

TEST_CASE("Nemenyi critical difference") {
  CHECK(nemenyi_q(5, 0.05) == doctest::Approx(2.728));
  CHECK(nemenyi_critical_difference(5, 10, 0.05) == doctest::Approx(2.728 * std::sqrt(30.0 / 60.0)));
  CHECK(nemenyi_critical_difference(5, 10, 0.05) == doctest::Approx(1.929).epsilon(1e-3));
  CHECK(nemenyi_q(2, 0.05) == doctest::Approx(1.960));
  CHECK_THROWS_AS(nemenyi_q(11, 0.05), ConfigError);
  CHECK_THROWS_AS(nemenyi_q(5, 0.01), ConfigError);
}

TEST_CASE("Friedman: strict order, ties, rank sums") {
  // Method 0 always best, then 1, then 2, over four blocks.
  const std::vector<std::vector<double>> strict{{1, 1, 1, 1}, {2, 2, 2, 2}, {3, 3, 3, 3}};
  const RankReport r = friedman_nemenyi(strict, 0.05, {"a", "b", "c"});
  CHECK(r.average_rank == std::vector<double>{1.0, 2.0, 3.0});
  // 12N / (k(k+1)) * (sum R^2 - k(k+1)^2 / 4) = 4 * (14 - 12) = 8.
  CHECK(r.friedman_statistic == doctest::Approx(8.0));
  CHECK(r.p_value == doctest::Approx(std::exp(-4.0)).epsilon(1e-9));
  CHECK(r.critical_difference == doctest::Approx(nemenyi_critical_difference(3, 4, 0.05)));
  CHECK(r.significant[0][2]);
  CHECK_FALSE(r.significant[0][1]);
  CHECK(r.methods[1] == "b");

  const std::vector<std::vector<double>> tied{{7, 1, 3}, {7, 1, 3}, {7, 1, 3}, {7, 1, 3}};
  const RankReport t = friedman_nemenyi(tied);
  for (double a : t.average_rank) CHECK(a == doctest::Approx(2.5));
  CHECK(t.friedman_statistic == doctest::Approx(0.0));

  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> u(0, 3);
  std::vector<std::vector<double>> scores(5, std::vector<double>(12));
  for (auto& row : scores) {
    for (auto& x : row) x = u(rng);
  }
  const RankReport rr = friedman_nemenyi(scores);
  double sum = 0;
  for (double a : rr.average_rank) {
    CHECK(a >= 1.0);
    CHECK(a <= 5.0);
    sum += a;
  }
  CHECK(sum == doctest::Approx(15.0));

  CHECK_THROWS_AS(friedman_nemenyi({{1, 2}, {2, 1}}), DataError);
  CHECK_THROWS_AS(friedman_nemenyi({{1}, {2}, {3}}), DataError);
  CHECK_THROWS_AS(friedman_nemenyi({{1, 2}, {2, 1}, {3}}), DataError);
}

TEST_CASE("PCA matches an explicit eigendecomposition") {
  const std::size_t n = 400;
  const auto z = gaussian(3 * n, 5);
  std::vector<double> rows(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    rows[3 * i + 0] = 3.0 * z[3 * i] + 0.5 * z[3 * i + 1];
    rows[3 * i + 1] = 1.0 * z[3 * i + 1] - 1.0 * z[3 * i];
    rows[3 * i + 2] = 0.3 * z[3 * i + 2] + 4.0;
  }
  const PcaProjection fit = pca_project_2d(rows, 3);
  REQUIRE(fit.coordinates.size() == n);

  Eigen::MatrixXd X(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 3; ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[3 * i + j];
  }
  const Eigen::MatrixXd c = X.rowwise() - X.colwise().mean();
  const Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(n - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::Vector3d ev = es.eigenvalues();  // ascending
  CHECK(fit.eigenvalues[0] == doctest::Approx(ev(2)).epsilon(1e-6));
  CHECK(fit.eigenvalues[1] == doctest::Approx(ev(1)).epsilon(1e-6));

  for (int k = 0; k < 2; ++k) {
    const Eigen::Vector3d axis = es.eigenvectors().col(2 - k);
    double dot = 0;
    for (int j = 0; j < 3; ++j) dot += axis(j) * fit.components[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
    CHECK(std::abs(dot) == doctest::Approx(1.0).epsilon(1e-6));
    const auto& comp = fit.components[static_cast<std::size_t>(k)];
    const auto big = std::max_element(comp.begin(), comp.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    CHECK(*big > 0.0);
  }

  // Projected variances equal the eigenvalues.
  for (int k = 0; k < 2; ++k) {
    double m = 0, v = 0;
    for (const auto& p : fit.coordinates) m += p[static_cast<std::size_t>(k)];
    m /= static_cast<double>(n);
    for (const auto& p : fit.coordinates) v += (p[static_cast<std::size_t>(k)] - m) * (p[static_cast<std::size_t>(k)] - m);
    v /= static_cast<double>(n - 1);
    CHECK(v == doctest::Approx(fit.eigenvalues[static_cast<std::size_t>(k)]).epsilon(1e-6));
  }

  const auto again = pca_apply(fit, rows);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(again[i][0] == doctest::Approx(fit.coordinates[i][0]).epsilon(1e-12));
  }
}

TEST_CASE("PCA: rank-one data, permutation equivariance, errors") {
  std::vector<double> rows;
  for (int i = 0; i < 50; ++i) {
    const double t = i * 0.1;
    rows.insert(rows.end(), {t, 2 * t, -t});
  }
  const PcaProjection fit = pca_project_2d(rows, 3);
  CHECK(fit.eigenvalues[1] == doctest::Approx(0.0).epsilon(1e-9));

  std::vector<double> reversed;
  for (int i = 49; i >= 0; --i) {
    reversed.insert(reversed.end(), rows.begin() + 3 * i, rows.begin() + 3 * i + 3);
  }
  const PcaProjection rfit = pca_project_2d(reversed, 3);
  for (int i = 0; i < 50; ++i) {
    CHECK(rfit.coordinates[static_cast<std::size_t>(49 - i)][0] ==
          doctest::Approx(fit.coordinates[static_cast<std::size_t>(i)][0]).epsilon(1e-9));
  }

  CHECK_THROWS_AS(pca_project_2d(std::vector<double>{1, 2, 3}, 3), DataError);
  CHECK_THROWS_AS(pca_project_2d(std::vector<double>(12, 1.0), 3), DataError);
}
