#include "amda/augment.hpp"

#include <cmath>

#include "amda/error.hpp"
#include "amda/random.hpp"

namespace amda::augment {

ContributionVector relative_contributions(const sim::FacilityDataset& ds) {
  return relative_contributions(ds, 0, ds.size());
}

ContributionVector relative_contributions(const sim::FacilityDataset& ds, std::size_t begin, std::size_t end) {
  if (begin > end || end > ds.size()) throw DataError("contribution range out of bounds");
  ContributionVector c;
  for (ApplianceKind k : kAllAppliances) {
    const auto& v = ds.appliance(k).values;
    double sum = 0.0;
    for (std::size_t t = begin; t < end; ++t) sum += std::abs(v[t]);
    c.totals[index_of(k)] = sum;
    c.total += sum;
  }
  if (!(c.total > 0.0)) {
    throw DataError("relative contribution undefined: dataset '" + ds.id + "' is all zero");
  }
  for (std::size_t i = 0; i < kApplianceCount; ++i) c.p[i] = c.totals[i] / c.total;
  return c;
}

ContributionVector relative_contributions(const sim::FacilityDataset& ds, std::span<const std::size_t> samples) {
  ContributionVector c;
  for (ApplianceKind k : kAllAppliances) {
    const auto& v = ds.appliance(k).values;
    double sum = 0.0;
    for (std::size_t t : samples) {
      if (t >= v.size()) throw DataError("contribution sample index out of bounds");
      sum += std::abs(v[t]);
    }
    c.totals[index_of(k)] = sum;
    c.total += sum;
  }
  if (!(c.total > 0.0)) {
    throw DataError("relative contribution undefined: selected samples of '" + ds.id + "' are all zero");
  }
  for (std::size_t i = 0; i < kApplianceCount; ++i) c.p[i] = c.totals[i] / c.total;
  return c;
}

AugmentationPlan amda_scale_factors(const ContributionVector& p, double s) {
  if (!(s >= 0.0)) throw ConfigError("AMDA hyper-parameter s must be non-negative");
  AugmentationPlan plan;
  plan.method = Method::AMDA;
  plan.s = s;
  for (std::size_t i = 0; i < kApplianceCount; ++i) plan.factors[i] = s * (1.0 - p.p[i]);
  return plan;
}

sim::FacilityDataset apply_plan(const sim::FacilityDataset& ds, const AugmentationPlan& plan) {
  sim::FacilityDataset out = ds;
  for (ApplianceKind k : kAllAppliances) {
    const double f = plan[k];
    for (double& v : out.appliance(k).values) v *= f;
  }
  out.recompute_aggregate();
  out.id = ds.id + (plan.method == Method::AMDA ? "+amda" : "+rdm");
  return out;
}

AugmentedDataset amda_augment(const sim::FacilityDataset& ds, double s, bool renormalize_aggregate,
                              const std::optional<ContributionVector>& contributions) {
  const ContributionVector p = contributions ? *contributions : relative_contributions(ds);
  AugmentationPlan plan = amda_scale_factors(p, s);
  plan.source_dataset_id = ds.id;
  if (renormalize_aggregate) {
    double source = 0.0;
    double scaled = 0.0;
    for (ApplianceKind k : kAllAppliances) {
      double sum = 0.0;
      for (double v : ds.appliance(k).values) sum += v;
      source += sum;
      scaled += plan[k] * sum;
    }
    if (scaled == 0.0 || (source / scaled) < 0.0) {
      throw DataError("cannot renormalize: augmented aggregate energy is zero or changes sign");
    }
    const double c = source / scaled;
    for (double& f : plan.factors) f *= c;
    plan.renormalized = true;
  }
  AugmentedDataset out{apply_plan(ds, plan), plan};
  return out;
}

AugmentedDataset amda_augment_random(const sim::FacilityDataset& ds, double lo, double hi, std::uint64_t seed,
                                     bool renormalize_aggregate,
                                     const std::optional<ContributionVector>& contributions) {
  if (!(lo >= 0.0) || !(hi >= lo)) throw ConfigError("s range must satisfy 0 <= lo <= hi");
  Rng rng(derive_seed(seed, "amda-s"));
  AugmentedDataset out = amda_augment(ds, rng.uniform(lo, hi), renormalize_aggregate, contributions);
  out.plan.seed = seed;
  return out;
}

std::vector<double> default_rdm_factors() {
  constexpr int n = 14;
  std::vector<double> f(n);
  for (int k = 0; k < n; ++k) f[k] = 0.2 * std::pow(50.0, static_cast<double>(k) / (n - 1));
  return f;
}

std::vector<AugmentedDataset> rdm_augment(const sim::FacilityDataset& ds, const std::vector<double>& factors) {
  if (factors.empty()) throw ConfigError("RDM needs at least one scale factor");
  std::vector<AugmentedDataset> out;
  out.reserve(factors.size());
  for (double f : factors) {
    if (!(f >= 0.0)) throw ConfigError("RDM scale factors must be non-negative");
    AugmentationPlan plan;
    plan.method = Method::RDM;
    plan.s = f;
    plan.factors.fill(f);
    plan.source_dataset_id = ds.id;
    out.push_back({apply_plan(ds, plan), plan});
  }
  return out;
}

ComposedTrainingSet compose_training_set(const std::vector<MemberRef>& members,
                                         std::optional<std::size_t> base_samples) {
  if (members.empty()) throw DataError("training set composition needs at least one member");
  ComposedTrainingSet set;
  const int period = members.front().dataset->timeline().period;
  for (const MemberRef& m : members) {
    const sim::FacilityDataset& ds = *m.dataset;
    if (ds.timeline().period != period) {
      throw DataError("member '" + ds.id + "' has sampling period " + std::to_string(ds.timeline().period) +
                      " s, expected " + std::to_string(period) + " s");
    }
    for (const auto& a : ds.appliances) {
      if (a.values.size() != ds.size()) throw DataError("member '" + ds.id + "' has ragged columns");
    }
    set.members.push_back({ds.id, ds.size(), period, m.plan});
    set.total_samples += ds.size();
  }
  set.base_samples = base_samples ? *base_samples : set.members.front().samples;
  if (set.base_samples == 0) throw DataError("base sample count is zero");
  set.relative_increase =
      100.0 * (static_cast<double>(set.total_samples) / static_cast<double>(set.base_samples) - 1.0);
  return set;
}

std::string to_string(Method m) { return m == Method::AMDA ? "amda" : "rdm"; }

Method parse_method(const std::string& text) {
  if (text == "amda") return Method::AMDA;
  if (text == "rdm") return Method::RDM;
  throw ConfigError("unknown augmentation method '" + text + "'");
}

}  // namespace amda::augment
