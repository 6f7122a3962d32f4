#pragma once

// Appliance-modulated data augmentation (AMDA), the uniform random-scaling
// baseline (RDM) and composition of training pools from several datasets.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amda/appliance.hpp"
#include "amda/sim_core.hpp"

namespace amda::augment {

/// Share of each appliance in the total absolute energy of a dataset.
struct ContributionVector {
  std::array<double, kApplianceCount> p{};        // relative contributions
  std::array<double, kApplianceCount> totals{};   // sum_t |x_{i,t}| (W-samples)
  double total = 0.0;                             // sum_i totals[i]

  double operator[](ApplianceKind k) const { return p[index_of(k)]; }
};

enum class Method { AMDA, RDM };

struct AugmentationPlan {
  Method method = Method::AMDA;
  double s = 0.0;                                  // AMDA hyper-parameter (RDM: the factor)
  std::array<double, kApplianceCount> factors{};   // S_i applied to each appliance
  std::string source_dataset_id;
  std::optional<std::uint64_t> seed;               // set when s was drawn at random
  bool renormalized = false;                       // S_i rescaled to keep aggregate energy

  double operator[](ApplianceKind k) const { return factors[index_of(k)]; }
};

/// p_i = sum_t |x_{i,t}| / sum_j sum_t |x_{j,t}|. Throws DataError for an
/// all-zero dataset.
ContributionVector relative_contributions(const sim::FacilityDataset& ds);

/// Contributions restricted to sample indices [begin, end).
ContributionVector relative_contributions(const sim::FacilityDataset& ds, std::size_t begin, std::size_t end);

/// Contributions restricted to the listed sample indices.
ContributionVector relative_contributions(const sim::FacilityDataset& ds, std::span<const std::size_t> samples);

/// S_i = s * (1 - p_i). Throws ConfigError for negative s.
AugmentationPlan amda_scale_factors(const ContributionVector& p, double s);

struct AugmentedDataset {
  sim::FacilityDataset dataset;
  AugmentationPlan plan;
};

/// Scales every appliance column by its plan factor and rebuilds the aggregate
/// as the sum of the scaled columns.
sim::FacilityDataset apply_plan(const sim::FacilityDataset& ds, const AugmentationPlan& plan);

/// One AMDA copy. With `renormalize_aggregate`, all S_i are multiplied by a
/// common constant so that the yearly aggregate energy matches the source.
/// `contributions` overrides the p_i computed from the whole dataset (e.g.
/// to use training-only statistics).
AugmentedDataset amda_augment(const sim::FacilityDataset& ds, double s, bool renormalize_aggregate = false,
                              const std::optional<ContributionVector>& contributions = std::nullopt);

/// Draws s uniformly from [lo, hi] with the given seed and applies AMDA.
AugmentedDataset amda_augment_random(const sim::FacilityDataset& ds, double lo, double hi, std::uint64_t seed,
                                     bool renormalize_aggregate = false,
                                     const std::optional<ContributionVector>& contributions = std::nullopt);

/// 14 factors log-spaced over [0.2, 10] (-80% .. +1000%).
std::vector<double> default_rdm_factors();

/// One copy per factor; all appliances of copy k are scaled by factors[k].
std::vector<AugmentedDataset> rdm_augment(const sim::FacilityDataset& ds,
                                          const std::vector<double>& factors = default_rdm_factors());

struct Member {
  std::string dataset_id;
  std::size_t samples = 0;
  int sample_period = 0;
  std::optional<AugmentationPlan> plan;
};

struct ComposedTrainingSet {
  std::vector<Member> members;
  std::size_t total_samples = 0;
  std::size_t base_samples = 0;
  double relative_increase = 0.0;  // percent vs. base_samples
};

struct MemberRef {
  const sim::FacilityDataset* dataset;
  std::optional<AugmentationPlan> plan;
};

/// Bookkeeping for a training pool. `base_samples` defaults to the first
/// member's length. Throws DataError for an empty list or mismatched
/// sampling periods.
ComposedTrainingSet compose_training_set(const std::vector<MemberRef>& members,
                                         std::optional<std::size_t> base_samples = std::nullopt);

std::string to_string(Method m);
Method parse_method(const std::string& text);

}  // namespace amda::augment
