#pragma once

// Preprocessing: bin-mean resampling, robust (median / IQR) scaling and
// sequence-to-point windowing.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "amda/sim_core.hpp"

namespace amda::pipeline {

inline constexpr double kScaleEpsilon = 1e-9;  // W

struct RobustScaleParams {
  double median = 0.0;
  double iqr = 0.0;
  std::string signal_id;

  double divisor() const { return iqr > kScaleEpsilon ? iqr : kScaleEpsilon; }
  double transform(double x) const { return (x - median) / divisor(); }
  double inverse(double z) const { return z * divisor() + median; }
};

/// Quantile of already sorted data, linear interpolation between order
/// statistics (position q * (n - 1)).
double sorted_quantile(std::span<const double> sorted, double q);

/// Throws DataError for an empty trace.
RobustScaleParams fit_scaler(std::span<const double> trace, std::string signal_id = {});
std::vector<double> transform(const RobustScaleParams& params, std::span<const double> trace);
std::vector<double> inverse(const RobustScaleParams& params, std::span<const double> trace);

/// Non-overlapping bin means. Throws DataError unless period_out is a
/// multiple of period_in; a trailing partial bin is dropped.
std::vector<double> resample(std::span<const double> trace, int period_in, int period_out);

/// Resamples every column; the aggregate is rebuilt from the resampled
/// appliance columns so the sum identity stays exact.
sim::FacilityDataset resample(const sim::FacilityDataset& ds, int period_out);

/// Samples [begin, begin + count).
sim::FacilityDataset slice(const sim::FacilityDataset& ds, std::size_t begin, std::size_t count);

struct WindowSpec {
  std::size_t window_len = 288;
  std::size_t stride = 5;
  std::size_t center_index = 144;

  void validate() const;
  bool operator==(const WindowSpec&) const = default;
};

struct WindowedDataset {
  WindowSpec spec;
  std::vector<float> inputs;           // count x window_len, row-major
  std::vector<float> targets;          // count
  std::vector<std::size_t> centers;    // source sample index of each target
  std::vector<std::int64_t> timestamps;  // source timestamp of each target

  std::size_t size() const { return targets.size(); }
  std::span<const float> window(std::size_t i) const {
    return {inputs.data() + i * spec.window_len, spec.window_len};
  }
};

/// floor((T - w) / stride) + 1 for T >= w, else 0.
std::size_t window_count(std::size_t length, const WindowSpec& spec);

/// Windows over aligned (already normalized) aggregate and target series.
/// Throws DataError when the series are shorter than one window.
WindowedDataset make_windows(std::span<const double> aggregate, std::span<const double> target,
                             const WindowSpec& spec, const sim::Timeline& timeline = {});

WindowedDataset subset(const WindowedDataset& ds, std::span<const std::size_t> indices);
WindowedDataset concat(const std::vector<const WindowedDataset*>& parts);

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

/// Seeded random permutation split into sizes round(f0 n), round(f1 n) and
/// the remainder. Throws ConfigError unless fractions are >= 0 and sum to 1.
SplitIndices split_indices(std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed);

struct SplitDatasets {
  WindowedDataset train, val, test;
};

SplitDatasets split(const WindowedDataset& ds, const std::array<double, 3>& fractions, std::uint64_t seed);

}  // namespace amda::pipeline
