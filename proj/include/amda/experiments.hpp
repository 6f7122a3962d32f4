#pragma once

// End-to-end evaluation protocols: appliance variation, facility variation
// and distribution alignment, with seeded repetitions.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "amda/augment.hpp"
#include "amda/metrics.hpp"
#include "amda/models.hpp"
#include "amda/pipeline.hpp"
#include "amda/sim_core.hpp"

namespace amda::experiments {

enum class Scenario { ApplianceVariation, FacilityVariation, DistributionAlignment };

std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& text);

/// Normalization of a training pool and of the data it is evaluated on.
/// Pooled: one scaler fitted on the training samples of all pool members,
/// applied to the pool and to the test data.
/// Source: each member uses its source configuration's training scaler; a
/// foreign test facility uses a scaler fitted on itself (transductive).
/// Own: like Source, but augmented copies use scalers fitted on themselves.
enum class ScalerPolicy { Pooled, Source, Own };

std::string to_string(ScalerPolicy p);
ScalerPolicy parse_scaler_policy(const std::string& text);
/// Sample space of the divergence estimate: watts, or the normalized values
/// the models are trained on.
enum class DivergenceSpace { Raw, Normalized };

std::vector<double> default_variation_grid();  // 0.0, 0.2, ..., 2.0

struct ScenarioConfig {
  Scenario scenario = Scenario::FacilityVariation;
  ApplianceKind target = ApplianceKind::CHP;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::uint64_t data_seed = 1;  // simulation seed shared by all repetitions
  int months_of_data = 2;
  int start_month = 1;
  int resample_period = 300;  // s
  pipeline::WindowSpec window;
  models::ModelSpec model;
  models::TrainOpts train;  // seed is replaced per repetition

  std::string train_facility = "office-offenbach";
  std::string enlarge_facility = "dealer-offenbach";
  std::string test_facility = "logistics-los-angeles";

  std::array<double, 3> av_split{0.7225, 0.1275, 0.15};
  std::vector<double> av_amda_s{1.5, 4.0};
  ApplianceKind varied = ApplianceKind::BA;
  std::vector<double> variation_grid = default_variation_grid();

  std::array<double, 2> fv_split{0.8, 0.2};
  double amda_s = 1.73;
  std::vector<double> rdm_factors = augment::default_rdm_factors();
  std::uint64_t mp_seed_offset = 1000;  // MP trains on an independent realization
  ScalerPolicy scaler = ScalerPolicy::Pooled;
  bool renormalize_aggregate = false;

  DivergenceSpace divergence_space = DivergenceSpace::Raw;
  std::size_t divergence_bins = metrics::kDefaultBins;
  double divergence_eps = metrics::kDefaultSmoothing;
  std::size_t pca_rows = 1000;  // per exported set, evenly subsampled

  /// Throws ConfigError on the first inconsistent setting.
  void validate() const;
  /// Sets one `key = value` entry; throws ConfigError for unknown keys or
  /// malformed values.
  void set(const std::string& key, const std::string& value);
  /// Canonical `key = value` lines covering every setting.
  std::vector<std::pair<std::string, std::string>> settings() const;
};

/// Simulates a preset with `seed`, resamples and cuts the configured months.
sim::FacilityDataset load_facility(const std::string& preset, std::uint64_t seed, const ScenarioConfig& cfg);

/// Copy with one appliance multiplied by `s` and the aggregate recomputed.
sim::FacilityDataset scale_appliance(const sim::FacilityDataset& ds, ApplianceKind kind, double s);

struct ScalerPair {
  pipeline::RobustScaleParams aggregate;
  pipeline::RobustScaleParams target;
};

/// Scalers fitted on the listed samples of `ds` only.
ScalerPair fit_scalers(const sim::FacilityDataset& ds, ApplianceKind target, std::span<const std::size_t> samples);
/// Scalers fitted on the listed samples of every dataset, pooled.
ScalerPair fit_pooled_scalers(const std::vector<const sim::FacilityDataset*>& datasets, ApplianceKind target,
                              std::span<const std::size_t> samples);

/// Normalized windows of `ds` (aggregate input, `target` output).
pipeline::WindowedDataset normalized_windows(const sim::FacilityDataset& ds, ApplianceKind target,
                                             const ScalerPair& scalers, const pipeline::WindowSpec& spec);

/// Source sample index at the center of each listed window.
std::vector<std::size_t> window_centers(std::span<const std::size_t> windows, const pipeline::WindowSpec& spec);

struct RecipeMember {
  sim::FacilityDataset data;
  std::string scaler_source;  // id of the configuration whose scaler applies
  std::optional<augment::AugmentationPlan> plan;
};

struct Recipe {
  std::string name;
  std::vector<RecipeMember> members;
};

/// Scaler of every recipe member (in order) and, when the policy defines
/// one, the scaler for evaluation data.
struct RecipeScaling {
  std::vector<ScalerPair> members;
  std::optional<ScalerPair> test;
};

/// `sources` maps configuration ids to scalers fitted on `samples`.
RecipeScaling recipe_scaling(const Recipe& recipe, const ScenarioConfig& cfg, std::span<const std::size_t> samples,
                             const std::map<std::string, ScalerPair>& sources);

/// Base, Enlarged, RDM, Base* and Enlarged* built from the training and
/// enlargement facilities.
std::vector<Recipe> build_recipes(const sim::FacilityDataset& base, const sim::FacilityDataset& extra,
                                  const ScenarioConfig& cfg);

struct RunRecord {
  std::string variant;
  std::uint64_t seed = 0;
  std::optional<double> s;  // test-set scale (appliance variation)
  metrics::MetricsReport metrics;
  int best_epoch = 0;
  int epochs_run = 0;
};

struct VariantSummary {
  std::string name;
  std::size_t repetitions = 0;
  metrics::MetricsReport mean;
  metrics::MetricsReport std;
  std::size_t train_samples = 0;  // series samples over all members
  std::size_t train_windows = 0;
  std::size_t val_windows = 0;
  double relative_increase = 0;   // percent vs. the base pool
  std::size_t macs_per_window = 0;
  double average_rank = 0;        // over (metric x test set) blocks
};

struct CurvePoint {
  std::string variant;
  double s = 0;
  double mean_nde = 0;
  double std_nde = 0;
  std::size_t repetitions = 0;
};

struct DivergenceRow {
  std::string recipe;
  metrics::DivergenceReport report;
  double kl_reduction_pct = 0;  // vs. Base
  double js_reduction_pct = 0;
};

struct PcaPoint {
  std::string set;
  double x = 0;
  double y = 0;
};

struct ScenarioReport {
  Scenario scenario = Scenario::FacilityVariation;
  std::vector<std::pair<std::string, std::string>> settings;
  std::vector<std::pair<std::string, std::string>> notes;  // protocol choices
  std::vector<VariantSummary> variants;
  std::vector<RunRecord> runs;
  std::vector<CurvePoint> curve;
  std::optional<metrics::RankReport> ranks;
  std::vector<DivergenceRow> divergence;
  std::vector<PcaPoint> pca;
  /// Wall-clock seconds per training run; not part of the deterministic output.
  std::vector<std::pair<std::string, double>> timing;

  const VariantSummary& variant(const std::string& name) const;
  const DivergenceRow& divergence_row(const std::string& recipe) const;
};

ScenarioReport run_appliance_variation(const ScenarioConfig& cfg);
ScenarioReport run_facility_variation(const ScenarioConfig& cfg);
ScenarioReport run_distribution_alignment(const ScenarioConfig& cfg);
ScenarioReport run(const ScenarioConfig& cfg);

/// Writes the deterministic report files into `dir` and returns their
/// paths; wall-clock goes to timing.txt, which is returned separately.
struct WrittenReport {
  std::vector<std::filesystem::path> files;
  std::filesystem::path timing;
};
WrittenReport write_report(const ScenarioReport& report, const std::filesystem::path& dir);

}  // namespace amda::experiments
