#include "amda/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "amda/error.hpp"
#include "amda/random.hpp"

namespace amda::pipeline {

double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DataError("quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

RobustScaleParams fit_scaler(std::span<const double> trace, std::string signal_id) {
  if (trace.empty()) throw DataError("cannot fit a scaler on an empty trace");
  std::vector<double> sorted(trace.begin(), trace.end());
  std::sort(sorted.begin(), sorted.end());
  RobustScaleParams p;
  p.median = sorted_quantile(sorted, 0.5);
  p.iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);
  p.signal_id = std::move(signal_id);
  return p;
}

std::vector<double> transform(const RobustScaleParams& params, std::span<const double> trace) {
  std::vector<double> out(trace.size());
  std::transform(trace.begin(), trace.end(), out.begin(), [&](double x) { return params.transform(x); });
  return out;
}

std::vector<double> inverse(const RobustScaleParams& params, std::span<const double> trace) {
  std::vector<double> out(trace.size());
  std::transform(trace.begin(), trace.end(), out.begin(), [&](double z) { return params.inverse(z); });
  return out;
}

std::vector<double> resample(std::span<const double> trace, int period_in, int period_out) {
  if (period_in <= 0 || period_out <= 0 || period_out % period_in != 0) {
    throw DataError("cannot resample from " + std::to_string(period_in) + " s to " + std::to_string(period_out) +
                    " s: output period must be a multiple of the input period");
  }
  const auto bin = static_cast<std::size_t>(period_out / period_in);
  std::vector<double> out(trace.size() / bin);
  for (std::size_t b = 0; b < out.size(); ++b) {
    double sum = 0.0;
    for (std::size_t j = 0; j < bin; ++j) sum += trace[b * bin + j];
    out[b] = sum / static_cast<double>(bin);
  }
  return out;
}

sim::FacilityDataset resample(const sim::FacilityDataset& ds, int period_out) {
  const int period_in = ds.timeline().period;
  sim::FacilityDataset out;
  out.id = ds.id;
  out.config = ds.config;
  out.weather.temperature = resample(ds.weather.temperature, period_in, period_out);
  out.weather.diffuse_radiation = resample(ds.weather.diffuse_radiation, period_in, period_out);
  out.weather.direct_radiation = resample(ds.weather.direct_radiation, period_in, period_out);
  out.weather.timeline = {ds.timeline().start, period_out, out.weather.temperature.size()};
  for (ApplianceKind k : kAllAppliances) {
    out.appliance(k) = {k, resample(ds.appliance(k).values, period_in, period_out)};
  }
  out.recompute_aggregate();
  return out;
}

sim::FacilityDataset slice(const sim::FacilityDataset& ds, std::size_t begin, std::size_t count) {
  if (begin + count > ds.size()) throw DataError("slice exceeds dataset length");
  auto cut = [&](const std::vector<double>& v) {
    return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(begin),
                               v.begin() + static_cast<std::ptrdiff_t>(begin + count));
  };
  sim::FacilityDataset out;
  out.id = ds.id;
  out.config = ds.config;
  out.weather.timeline = {ds.timeline().at(begin), ds.timeline().period, count};
  out.weather.temperature = cut(ds.weather.temperature);
  out.weather.diffuse_radiation = cut(ds.weather.diffuse_radiation);
  out.weather.direct_radiation = cut(ds.weather.direct_radiation);
  for (ApplianceKind k : kAllAppliances) out.appliance(k) = {k, cut(ds.appliance(k).values)};
  out.aggregate = cut(ds.aggregate);
  return out;
}

void WindowSpec::validate() const {
  if (window_len == 0) throw ConfigError("window length must be positive");
  if (stride < 1) throw ConfigError("window stride must be >= 1");
  if (center_index >= window_len) throw ConfigError("window center index must lie inside the window");
}

std::size_t window_count(std::size_t length, const WindowSpec& spec) {
  if (length < spec.window_len) return 0;
  return (length - spec.window_len) / spec.stride + 1;
}

WindowedDataset make_windows(std::span<const double> aggregate, std::span<const double> target,
                             const WindowSpec& spec, const sim::Timeline& timeline) {
  spec.validate();
  if (aggregate.size() != target.size()) throw DataError("aggregate and target lengths differ");
  if (aggregate.size() < spec.window_len) {
    throw DataError("series of length " + std::to_string(aggregate.size()) + " is shorter than one window (" +
                    std::to_string(spec.window_len) + ")");
  }
  const std::size_t n = window_count(aggregate.size(), spec);
  WindowedDataset ds;
  ds.spec = spec;
  ds.inputs.resize(n * spec.window_len);
  ds.targets.resize(n);
  ds.centers.resize(n);
  ds.timestamps.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t start = k * spec.stride;
    float* row = ds.inputs.data() + k * spec.window_len;
    for (std::size_t j = 0; j < spec.window_len; ++j) row[j] = static_cast<float>(aggregate[start + j]);
    ds.centers[k] = start + spec.center_index;
    ds.targets[k] = static_cast<float>(target[ds.centers[k]]);
    ds.timestamps[k] = timeline.at(ds.centers[k]);
  }
  return ds;
}

WindowedDataset subset(const WindowedDataset& ds, std::span<const std::size_t> indices) {
  WindowedDataset out;
  out.spec = ds.spec;
  const std::size_t w = ds.spec.window_len;
  out.inputs.resize(indices.size() * w);
  out.targets.resize(indices.size());
  out.centers.resize(indices.size());
  out.timestamps.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t k = indices[i];
    if (k >= ds.size()) throw DataError("window index out of range");
    std::copy_n(ds.inputs.begin() + static_cast<std::ptrdiff_t>(k * w), w,
                out.inputs.begin() + static_cast<std::ptrdiff_t>(i * w));
    out.targets[i] = ds.targets[k];
    out.centers[i] = ds.centers[k];
    out.timestamps[i] = ds.timestamps[k];
  }
  return out;
}

WindowedDataset concat(const std::vector<const WindowedDataset*>& parts) {
  if (parts.empty()) throw DataError("nothing to concatenate");
  WindowedDataset out;
  out.spec = parts.front()->spec;
  for (const WindowedDataset* p : parts) {
    if (!(p->spec == out.spec)) throw DataError("cannot concatenate windows with different specs");
    out.inputs.insert(out.inputs.end(), p->inputs.begin(), p->inputs.end());
    out.targets.insert(out.targets.end(), p->targets.begin(), p->targets.end());
    out.centers.insert(out.centers.end(), p->centers.begin(), p->centers.end());
    out.timestamps.insert(out.timestamps.end(), p->timestamps.begin(), p->timestamps.end());
  }
  return out;
}

SplitIndices split_indices(std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ConfigError("split fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(perm);

  const auto n_train = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(fractions[0] * n)));
  const auto n_val = std::min<std::size_t>(n - n_train, static_cast<std::size_t>(std::llround(fractions[1] * n)));
  SplitIndices s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
               perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  return s;
}

SplitDatasets split(const WindowedDataset& ds, const std::array<double, 3>& fractions, std::uint64_t seed) {
  const SplitIndices idx = split_indices(ds.size(), fractions, seed);
  return {subset(ds, idx.train), subset(ds, idx.val), subset(ds, idx.test)};
}

}  // namespace amda::pipeline
