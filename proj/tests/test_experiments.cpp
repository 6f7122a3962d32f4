#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "amda/error.hpp"
#include "amda/experiments.hpp"
#include "amda/io.hpp"
#include "doctest.h"

using namespace amda;
using namespace amda::experiments;
namespace fs = std::filesystem;

namespace {

// One month, two seeds, a tiny MLP and a short schedule.
ScenarioConfig small_config(Scenario s) {
  ScenarioConfig c;
  c.scenario = s;
  c.set("months", "1");
  c.set("seeds", "1,2");
  c.set("model.hidden", "8");
  c.set("train.max_epochs", "4");
  c.set("train.patience", "2");
  c.set("pca.rows", "50");
  return c;
}

const sim::FacilityDataset& office_month() {
  static const sim::FacilityDataset ds = load_facility("office-offenbach", 1, small_config(Scenario::FacilityVariation));
  return ds;
}

const sim::FacilityDataset& dealer_month() {
  static const sim::FacilityDataset ds = load_facility("dealer-offenbach", 1, small_config(Scenario::FacilityVariation));
  return ds;
}

std::string slurp(const fs::path& p) { return io::read_file(p); }

}  // namespace

TEST_CASE("variation grid has eleven points from 0 to 2") {
  const auto g = default_variation_grid();
  REQUIRE(g.size() == 11);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(0.2 * static_cast<double>(i)));
}

TEST_CASE("scenario config: settings round trip and validation") {
  ScenarioConfig c = small_config(Scenario::ApplianceVariation);
  c.set("scaler", "source");
  c.set("fv.amda_s", "2.5");
  c.set("divergence.space", "normalized");
  ScenarioConfig d;
  for (const auto& [k, v] : c.settings()) d.set(k, v);
  CHECK(d.settings() == c.settings());
  CHECK(d.scaler == ScalerPolicy::Source);
  CHECK(d.amda_s == 2.5);
  CHECK(d.seeds == std::vector<std::uint64_t>{1, 2});

  CHECK_THROWS_AS(c.set("no.such.key", "1"), ConfigError);
  CHECK_THROWS_AS(c.set("months", "two"), ConfigError);
  CHECK_THROWS_AS(c.set("scaler", "global"), ConfigError);

  ScenarioConfig bad;
  bad.start_month = 12;
  bad.months_of_data = 2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.seeds.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.test_facility = "office-paris";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.window.window_len = 144;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  CHECK(parse_scenario(to_string(Scenario::DistributionAlignment)) == Scenario::DistributionAlignment);
  CHECK(parse_scaler_policy(to_string(ScalerPolicy::Own)) == ScalerPolicy::Own);
}

TEST_CASE("load_facility cuts whole months at the resampled period") {
  const sim::FacilityDataset& ds = office_month();
  CHECK(ds.size() == 31 * 288);
  CHECK(ds.timeline().period == 300);
  CHECK(ds.timeline().start == 1546300800);
  ScenarioConfig c = small_config(Scenario::FacilityVariation);
  c.set("start_month", "3");
  const sim::FacilityDataset march = load_facility("dealer-offenbach", 1, c);
  CHECK(march.size() == 31 * 288);
  CHECK(march.timeline().start == 1546300800 + 59 * 86400);
}

TEST_CASE("scale_appliance: zero, identity and re-summed aggregate") {
  const sim::FacilityDataset& ds = office_month();
  const sim::FacilityDataset zero = scale_appliance(ds, ApplianceKind::BA, 0.0);
  for (double v : zero.appliance(ApplianceKind::BA).values) REQUIRE(v == 0.0);
  for (std::size_t t = 0; t < ds.size(); ++t) {
    double sum = 0;
    for (ApplianceKind k : kAllAppliances) sum += zero.appliance(k).values[t];
    REQUIRE(zero.aggregate[t] == doctest::Approx(sum).epsilon(1e-12));
  }
  const sim::FacilityDataset same = scale_appliance(ds, ApplianceKind::BA, 1.0);
  CHECK(same.aggregate == ds.aggregate);
  CHECK(same.appliance(ApplianceKind::BA).values == ds.appliance(ApplianceKind::BA).values);
}

TEST_CASE("window centers and normalized windows") {
  const pipeline::WindowSpec spec;
  const std::vector<std::size_t> w{0, 3, 10};
  CHECK(window_centers(w, spec) == std::vector<std::size_t>{144, 159, 194});

  const sim::FacilityDataset& ds = office_month();
  const auto centers = window_centers(std::vector<std::size_t>{0, 1, 2, 3, 4}, spec);
  const ScalerPair sc = fit_scalers(ds, ApplianceKind::CHP, centers);
  const pipeline::WindowedDataset win = normalized_windows(ds, ApplianceKind::CHP, sc, spec);
  REQUIRE(win.size() == pipeline::window_count(ds.size(), spec));
  CHECK(win.targets[7] == static_cast<float>(sc.target.transform(ds.appliance(ApplianceKind::CHP).values[7 * 5 + 144])));
  CHECK(win.window(2)[0] == static_cast<float>(sc.aggregate.transform(ds.aggregate[10])));
}

TEST_CASE("pooled scalers use the samples of every member") {
  const sim::FacilityDataset& a = office_month();
  const sim::FacilityDataset& b = dealer_month();
  const std::vector<std::size_t> idx{1, 5, 9, 200};
  const ScalerPair pooled = fit_pooled_scalers({&a, &b}, ApplianceKind::CHP, idx);
  std::vector<double> chp;
  for (const auto* ds : {&a, &b}) {
    for (std::size_t i : idx) chp.push_back(ds->appliance(ApplianceKind::CHP).values[i]);
  }
  const pipeline::RobustScaleParams oracle = pipeline::fit_scaler(chp);
  CHECK(pooled.target.median == oracle.median);
  CHECK(pooled.target.iqr == oracle.iqr);
}

TEST_CASE("recipes: members, measured sizes, no test facility") {
  const ScenarioConfig c = small_config(Scenario::FacilityVariation);
  const auto recipes = build_recipes(office_month(), dealer_month(), c);
  REQUIRE(recipes.size() == 5);
  auto total = [](const Recipe& r) {
    std::size_t n = 0;
    for (const auto& m : r.members) n += m.data.size();
    return n;
  };
  const std::size_t base = office_month().size();
  CHECK(recipes[0].name == "Base");
  CHECK(total(recipes[0]) == base);
  CHECK(recipes[1].name == "Enlarged");
  CHECK(total(recipes[1]) == 2 * base);
  CHECK(recipes[2].name == "RDM");
  CHECK(total(recipes[2]) == 15 * base);
  CHECK(recipes[3].name == "Base*");
  CHECK(total(recipes[3]) == 2 * base);
  CHECK(recipes[4].name == "Enlarged*");
  CHECK(total(recipes[4]) == 4 * base);

  const auto& star = recipes[3].members[1];
  REQUIRE(star.plan.has_value());
  CHECK(star.plan->s == 1.73);
  CHECK(star.scaler_source == office_month().id);
  for (const Recipe& r : recipes) {
    for (const auto& m : r.members) CHECK(m.scaler_source != c.test_facility);
  }

  const std::vector<std::size_t> idx{0, 1, 2, 3};
  std::map<std::string, ScalerPair> sources{
      {office_month().id, fit_scalers(office_month(), c.target, idx)},
      {dealer_month().id, fit_scalers(dealer_month(), c.target, idx)}};
  const RecipeScaling pooled = recipe_scaling(recipes[1], c, idx, sources);
  REQUIRE(pooled.test.has_value());
  CHECK(pooled.members.size() == 2);
  CHECK(pooled.members[0].target.median == pooled.test->target.median);
  const ScalerPair oracle = fit_pooled_scalers({&office_month(), &dealer_month()}, c.target, idx);
  CHECK(pooled.test->target.median == oracle.target.median);

  ScenarioConfig src = c;
  src.scaler = ScalerPolicy::Source;
  const RecipeScaling per_source = recipe_scaling(recipes[1], src, idx, sources);
  CHECK_FALSE(per_source.test.has_value());
  CHECK(per_source.members[1].target.median == sources.at(dealer_month().id).target.median);
}

TEST_CASE("appliance variation: curve, repetitions, determinism") {
  ScenarioConfig c = small_config(Scenario::ApplianceVariation);
  c.set("av.grid", "0,1,2");
  const ScenarioReport a = run_appliance_variation(c);
  REQUIRE(a.variants.size() == 2);
  CHECK(a.variants[0].name == "mlp");
  CHECK(a.variants[1].name == "mlp*");
  CHECK(a.curve.size() == 2 * 3);
  for (const auto& p : a.curve) {
    CHECK(p.repetitions == 2);
    CHECK(p.mean_nde >= 0.0);
  }
  CHECK(a.runs.size() == 2 * 2 * 3);
  for (const auto& v : a.variants) {
    CHECK(v.repetitions == 2);
    CHECK(v.average_rank >= 1.0);
    CHECK(v.average_rank <= 2.0);
  }
  CHECK(a.variants[0].average_rank + a.variants[1].average_rank == doctest::Approx(3.0));

  const ScenarioReport b = run_appliance_variation(c);
  REQUIRE(b.runs.size() == a.runs.size());
  for (std::size_t i = 0; i < a.runs.size(); ++i) CHECK(a.runs[i].metrics.nde == b.runs[i].metrics.nde);
}

TEST_CASE("facility variation: variants, sizes, reports byte-identical") {
  const ScenarioConfig c = small_config(Scenario::FacilityVariation);
  const ScenarioReport r = run_facility_variation(c);
  const std::vector<std::string> names{"Base", "Enlarged", "RDM", "Base*", "Enlarged*", "MP"};
  REQUIRE(r.variants.size() == names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    CHECK(r.variants[i].name == names[i]);
    CHECK(r.variants[i].repetitions == 2);
    CHECK(std::isfinite(r.variants[i].mean.nde));
  }
  const std::size_t base = r.variant("Base").train_samples;
  CHECK(r.variant("Enlarged").train_samples == 2 * base);
  CHECK(r.variant("RDM").train_samples == 15 * base);
  CHECK(r.variant("Enlarged").relative_increase == doctest::Approx(100.0));
  CHECK(r.variant("RDM").relative_increase == doctest::Approx(1400.0));
  CHECK(r.runs.size() == 2 * names.size());
  REQUIRE(r.ranks.has_value());
  CHECK(r.ranks->n_blocks == 2);
  CHECK_THROWS_AS(r.variant("nope"), DataError);

  const fs::path d1 = fs::temp_directory_path() / "amda_fv_a";
  const fs::path d2 = fs::temp_directory_path() / "amda_fv_b";
  fs::remove_all(d1);
  fs::remove_all(d2);
  const WrittenReport w1 = write_report(r, d1);
  const WrittenReport w2 = write_report(run_facility_variation(c), d2);
  REQUIRE(w1.files.size() == w2.files.size());
  for (std::size_t i = 0; i < w1.files.size(); ++i) {
    CAPTURE(w1.files[i].string());
    CHECK(w1.files[i].filename() == w2.files[i].filename());
    CHECK(slurp(w1.files[i]) == slurp(w2.files[i]));
  }
  CHECK(fs::exists(w1.timing));
  CHECK(std::find(w1.files.begin(), w1.files.end(), w1.timing) == w1.files.end());
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("distribution alignment: Base reference row and PCA export") {
  const ScenarioConfig c = small_config(Scenario::DistributionAlignment);
  const ScenarioReport r = run_distribution_alignment(c);
  REQUIRE(r.divergence.size() == 5);
  const DivergenceRow& base = r.divergence_row("Base");
  CHECK(base.kl_reduction_pct == 0.0);
  CHECK(base.js_reduction_pct == 0.0);
  for (const auto& row : r.divergence) {
    CHECK(row.report.kl >= 0.0);
    CHECK(row.report.js <= std::log(2.0) + 1e-12);
    CHECK(row.kl_reduction_pct == doctest::Approx(100.0 * (1.0 - row.report.kl / base.report.kl)));
  }
  std::set<std::string> sets;
  for (const auto& p : r.pca) sets.insert(p.set);
  CHECK(sets == std::set<std::string>{"Base", "Base*", "test"});
  CHECK(r.pca.size() == 3 * 50);
}
