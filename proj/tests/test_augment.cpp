#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "amda/augment.hpp"
#include "amda/error.hpp"
#include "amda/sim_core.hpp"
#include "doctest.h"

using namespace amda;
using namespace amda::augment;
using sim::FacilityDataset;

namespace {

FacilityDataset small_dataset(std::size_t n, std::uint64_t seed, const std::string& id = "small") {
  FacilityDataset ds;
  ds.id = id;
  ds.weather.timeline = {0, 60, n};
  ds.weather.temperature.assign(n, 280.0);
  ds.weather.diffuse_radiation.assign(n, 0.0);
  ds.weather.direct_radiation.assign(n, 0.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double scale[] = {1e3, 5e4, 2e4, 8e4, 3e5};
  for (ApplianceKind k : kAllAppliances) {
    auto& col = ds.appliance(k);
    col.kind = k;
    col.values.resize(n);
    const double sign = role_of(k) == ApplianceRole::producer ? -1.0 : 1.0;
    for (auto& v : col.values) v = sign * scale[index_of(k)] * u(rng);
  }
  // A few exact zeros exercise the ratio checks.
  ds.appliance(ApplianceKind::PV).values[0] = 0.0;
  ds.appliance(ApplianceKind::EVSE).values[1] = 0.0;
  ds.recompute_aggregate();
  return ds;
}

const FacilityDataset& office() {
  static const FacilityDataset ds = sim::simulate_facility(sim::preset("office-offenbach"));
  return ds;
}

ContributionVector from_p(std::array<double, kApplianceCount> p) {
  ContributionVector c;
  c.p = p;
  c.totals = p;
  c.total = 1.0;
  return c;
}

}  // namespace

TEST_CASE("amda_scale_factors: worked values") {
  const AugmentationPlan a = amda_scale_factors(from_p({0.25, 0.25, 0.25, 0.25, 0.0}), 1.5);
  CHECK(a.factors[0] == doctest::Approx(1.125).epsilon(1e-12));
  const AugmentationPlan b = amda_scale_factors(from_p({0.009, 0.114, 0.080, 0.186, 0.601}), 1.5);
  CHECK(std::abs(b[ApplianceKind::BA] - 0.5985) <= 5e-4);
  CHECK(b[ApplianceKind::BA] == doctest::Approx(1.5 * (1 - 0.601)));
  CHECK(b.method == Method::AMDA);
  CHECK(b.s == 1.5);
}

TEST_CASE("amda_scale_factors: zero and negative s") {
  const AugmentationPlan z = amda_scale_factors(from_p({0.1, 0.2, 0.3, 0.2, 0.2}), 0.0);
  for (double f : z.factors) CHECK(f == 0.0);
  CHECK_THROWS_AS(amda_scale_factors(from_p({0.1, 0.2, 0.3, 0.2, 0.2}), -0.1), ConfigError);
}

TEST_CASE("scaled energy ordering can flip (office table totals)") {
  // P_total (kW) of CHP and PV with their contributions at s = 1.5.
  const double chp = 37185 * 1.5 * (1 - 0.186);
  const double pv = 22800 * 1.5 * (1 - 0.114);
  CHECK(chp == doctest::Approx(45401).epsilon(1e-4));
  CHECK(pv == doctest::Approx(30301).epsilon(1e-4));
  const AugmentationPlan plan = amda_scale_factors(from_p({0.009, 0.114, 0.080, 0.186, 0.601}), 1.5);
  CHECK(37185 * plan[ApplianceKind::CHP] == doctest::Approx(chp));
}

TEST_CASE("anti-monotonicity: S ranks reverse p ranks") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::array<double, kApplianceCount> raw{};
    for (auto& x : raw) x = u(rng);
    const double sum = std::accumulate(raw.begin(), raw.end(), 0.0);
    for (auto& x : raw) x /= sum;
    const double s = 0.01 + 10.0 * u(rng);
    const AugmentationPlan plan = amda_scale_factors(from_p(raw), s);
    for (std::size_t i = 0; i < kApplianceCount; ++i) {
      for (std::size_t j = 0; j < kApplianceCount; ++j) {
        if (raw[i] < raw[j]) REQUIRE(plan.factors[i] > plan.factors[j]);
      }
    }
  }
}

TEST_CASE("relative contributions: sum to one, streaming oracle, single appliance") {
  const FacilityDataset ds = small_dataset(1000, 1);
  const ContributionVector c = relative_contributions(ds);
  CHECK(std::accumulate(c.p.begin(), c.p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));

  FacilityDataset single = ds;
  for (ApplianceKind k : {ApplianceKind::PV, ApplianceKind::CS, ApplianceKind::CHP, ApplianceKind::BA}) {
    std::fill(single.appliance(k).values.begin(), single.appliance(k).values.end(), 0.0);
  }
  single.recompute_aggregate();
  const ContributionVector one = relative_contributions(single);
  CHECK(one[ApplianceKind::EVSE] == 1.0);
  CHECK(one[ApplianceKind::BA] == 0.0);

  FacilityDataset zero = single;
  std::fill(zero.appliance(ApplianceKind::EVSE).values.begin(), zero.appliance(ApplianceKind::EVSE).values.end(),
            0.0);
  CHECK_THROWS_AS(relative_contributions(zero), DataError);
}

TEST_CASE("relative contributions on the simulated office") {
  const FacilityDataset& ds = office();
  const ContributionVector c = relative_contributions(ds);

  // Streaming oracle: one pass over time, Kahan-compensated absolute sums.
  std::array<double, kApplianceCount> sum{}, comp{};
  for (std::size_t t = 0; t < ds.size(); ++t) {
    for (ApplianceKind k : kAllAppliances) {
      const std::size_t i = index_of(k);
      const double y = std::abs(ds.appliance(k).values[t]) - comp[i];
      const double next = sum[i] + y;
      comp[i] = (next - sum[i]) - y;
      sum[i] = next;
    }
  }
  const double total = std::accumulate(sum.begin(), sum.end(), 0.0);
  for (ApplianceKind k : kAllAppliances) {
    CAPTURE(name_of(k));
    CHECK(std::abs(c[k] - sum[index_of(k)] / total) <= 1e-12);
  }
  CHECK(std::accumulate(c.p.begin(), c.p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));

  CHECK(c[ApplianceKind::BA] > c[ApplianceKind::CHP]);
  CHECK(c[ApplianceKind::CHP] > c[ApplianceKind::PV]);
  CHECK(c[ApplianceKind::PV] > c[ApplianceKind::CS]);
  CHECK(c[ApplianceKind::CS] > c[ApplianceKind::EVSE]);
}

TEST_CASE("relative contributions over a range and a sample list agree") {
  const FacilityDataset ds = small_dataset(500, 2);
  const ContributionVector r = relative_contributions(ds, 100, 300);
  std::vector<std::size_t> idx(200);
  std::iota(idx.begin(), idx.end(), 100);
  const ContributionVector l = relative_contributions(ds, idx);
  for (std::size_t i = 0; i < kApplianceCount; ++i) CHECK(r.p[i] == doctest::Approx(l.p[i]).epsilon(1e-12));
  CHECK_THROWS_AS(relative_contributions(ds, 400, 600), DataError);
}

TEST_CASE("amda_augment: linearity, sign preservation, re-summed aggregate") {
  const FacilityDataset ds = small_dataset(2000, 3);
  for (double s : {0.5, 1.73, 4.0}) {
    CAPTURE(s);
    const AugmentedDataset aug = amda_augment(ds, s);
    const ContributionVector p = relative_contributions(ds);
    REQUIRE(aug.dataset.size() == ds.size());
    for (ApplianceKind k : kAllAppliances) {
      CHECK(aug.plan[k] == doctest::Approx(s * (1 - p[k])).epsilon(1e-14));
      const auto& x = ds.appliance(k).values;
      const auto& y = aug.dataset.appliance(k).values;
      bool ratio_ok = true, sign_ok = true, exact = true;
      for (std::size_t t = 0; t < x.size(); ++t) {
        exact = exact && y[t] == aug.plan[k] * x[t];
        if (x[t] != 0.0) ratio_ok = ratio_ok && std::abs(y[t] / x[t] - aug.plan[k]) <= 1e-12 * aug.plan[k];
        sign_ok = sign_ok && (y[t] == 0.0 || std::signbit(y[t]) == std::signbit(x[t]));
      }
      CHECK(exact);
      CHECK(ratio_ok);
      CHECK(sign_ok);
    }
    bool agg_ok = true;
    for (std::size_t t = 0; t < ds.size(); ++t) {
      double sum = 0.0, mag = 0.0;
      for (ApplianceKind k : kAllAppliances) {
        sum += aug.dataset.appliance(k).values[t];
        mag += std::abs(aug.dataset.appliance(k).values[t]);
      }
      agg_ok = agg_ok && std::abs(aug.dataset.aggregate[t] - sum) <= 1e-9 * std::max(mag, 1.0);
    }
    CHECK(agg_ok);
    CHECK(aug.dataset.weather.temperature == ds.weather.temperature);
  }
}

TEST_CASE("amda_augment on the office at s = 1.73 scales BA elementwise") {
  const FacilityDataset& ds = office();
  const AugmentedDataset aug = amda_augment(ds, 1.73);
  const double sba = aug.plan[ApplianceKind::BA];
  CHECK(sba == doctest::Approx(1.73 * (1 - relative_contributions(ds)[ApplianceKind::BA])));
  const auto& x = ds.appliance(ApplianceKind::BA).values;
  const auto& y = aug.dataset.appliance(ApplianceKind::BA).values;
  bool ok = true;
  for (std::size_t t = 0; t < x.size(); ++t) ok = ok && y[t] == sba * x[t];
  CHECK(ok);
}

TEST_CASE("amda_augment: s = 0 zeroes every column; override contributions") {
  const FacilityDataset ds = small_dataset(100, 4);
  const AugmentedDataset z = amda_augment(ds, 0.0);
  for (double v : z.dataset.aggregate) CHECK(v == 0.0);

  const ContributionVector fixed = from_p({0.2, 0.2, 0.2, 0.2, 0.2});
  const AugmentedDataset o = amda_augment(ds, 2.0, false, fixed);
  for (double f : o.plan.factors) CHECK(f == doctest::Approx(1.6));
}

TEST_CASE("amda_augment: renormalized aggregate keeps yearly energy") {
  const FacilityDataset ds = small_dataset(1000, 5);
  const AugmentedDataset aug = amda_augment(ds, 3.0, true);
  CHECK(aug.plan.renormalized);
  const double before = std::accumulate(ds.aggregate.begin(), ds.aggregate.end(), 0.0);
  const double after = std::accumulate(aug.dataset.aggregate.begin(), aug.dataset.aggregate.end(), 0.0);
  CHECK(after == doctest::Approx(before).epsilon(1e-9));
  // Common rescaling keeps the factor ratios.
  const AugmentedDataset plain = amda_augment(ds, 3.0);
  const double ratio = aug.plan.factors[0] / plain.plan.factors[0];
  for (std::size_t i = 0; i < kApplianceCount; ++i) {
    CHECK(aug.plan.factors[i] == doctest::Approx(ratio * plain.plan.factors[i]));
  }
}

TEST_CASE("amda_augment_random: seeded s within range") {
  const FacilityDataset ds = small_dataset(100, 6);
  const AugmentedDataset a = amda_augment_random(ds, 1.0, 5.0, 42);
  const AugmentedDataset b = amda_augment_random(ds, 1.0, 5.0, 42);
  CHECK(a.plan.s == b.plan.s);
  CHECK(a.plan.s >= 1.0);
  CHECK(a.plan.s <= 5.0);
  REQUIRE(a.plan.seed.has_value());
  CHECK(*a.plan.seed == 42);
  CHECK(amda_augment_random(ds, 1.0, 5.0, 43).plan.s != a.plan.s);
  CHECK_THROWS_AS(amda_augment_random(ds, 3.0, 1.0, 1), ConfigError);
}

TEST_CASE("rdm: 14 log-spaced factors from 0.2 to 10") {
  const auto f = default_rdm_factors();
  REQUIRE(f.size() == 14);
  for (std::size_t k = 0; k < f.size(); ++k) {
    CHECK(f[k] == doctest::Approx(0.2 * std::pow(50.0, static_cast<double>(k) / 13.0)).epsilon(1e-12));
  }
  CHECK(f.front() == doctest::Approx(0.2));
  CHECK(f.back() == doctest::Approx(10.0));
}

TEST_CASE("rdm_augment: joint scaling, identity copy, errors") {
  const FacilityDataset ds = small_dataset(300, 7);
  const auto copies = rdm_augment(ds);
  REQUIRE(copies.size() == 14);
  const auto& first = copies.front().dataset;
  for (ApplianceKind k : kAllAppliances) {
    const auto& x = ds.appliance(k).values;
    const auto& y = first.appliance(k).values;
    bool ok = true;
    for (std::size_t t = 0; t < x.size(); ++t) ok = ok && y[t] == doctest::Approx(0.2 * x[t]).epsilon(1e-12);
    CHECK(ok);
  }
  for (const auto& c : copies) {
    for (double f : c.plan.factors) CHECK(f == c.plan.s);
  }

  const auto id = rdm_augment(ds, {1.0});
  REQUIRE(id.size() == 1);
  CHECK(id[0].dataset.aggregate == ds.aggregate);
  for (ApplianceKind k : kAllAppliances) CHECK(id[0].dataset.appliance(k).values == ds.appliance(k).values);

  CHECK_THROWS_AS(rdm_augment(ds, {}), ConfigError);
  CHECK_THROWS_AS(rdm_augment(ds, {1.0, -2.0}), ConfigError);
}

TEST_CASE("compose_training_set: counts from totals") {
  const FacilityDataset a = small_dataset(400, 8, "a");
  const FacilityDataset b = small_dataset(400, 9, "b");

  const auto enlarged = compose_training_set({{&a, std::nullopt}, {&b, std::nullopt}});
  CHECK(enlarged.total_samples == 800);
  CHECK(enlarged.base_samples == 400);
  CHECK(enlarged.relative_increase == doctest::Approx(100.0));

  const auto twice = compose_training_set({{&a, std::nullopt}, {&a, std::nullopt}});
  CHECK(twice.total_samples == 800);

  std::vector<MemberRef> rdm{{&a, std::nullopt}};
  const auto copies = rdm_augment(a);
  for (const auto& c : copies) rdm.push_back({&c.dataset, c.plan});
  const auto pool = compose_training_set(rdm);
  CHECK(pool.total_samples == 15 * 400);
  CHECK(pool.relative_increase == doctest::Approx(1400.0));
  REQUIRE(pool.members.size() == 15);
  CHECK_FALSE(pool.members[0].plan.has_value());
  CHECK(pool.members[1].plan.has_value());

  CHECK_THROWS_AS(compose_training_set({}), DataError);
  FacilityDataset coarse = small_dataset(400, 10, "coarse");
  coarse.weather.timeline.period = 300;
  CHECK_THROWS_AS(compose_training_set({{&a, std::nullopt}, {&coarse, std::nullopt}}), DataError);
}

TEST_CASE("method names round trip") {
  CHECK(parse_method(to_string(Method::AMDA)) == Method::AMDA);
  CHECK(parse_method(to_string(Method::RDM)) == Method::RDM);
  CHECK_THROWS_AS(parse_method("jitter"), ConfigError);
}
