#include "amda/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "amda/calendar.hpp"
#include "amda/error.hpp"
#include "amda/text.hpp"

namespace amda::experiments {

namespace {

using pipeline::WindowedDataset;
using sim::FacilityDataset;

constexpr const char* kBase = "Base";
constexpr const char* kEnlarged = "Enlarged";
constexpr const char* kRdm = "RDM";
constexpr const char* kBaseStar = "Base*";
constexpr const char* kEnlargedStar = "Enlarged*";
constexpr const char* kMp = "MP";

std::string divergence_space_name(DivergenceSpace d) { return d == DivergenceSpace::Raw ? "raw" : "normalized"; }

std::string format_list(const std::vector<double>& v) {
  return text::join(v, ",", [](double x) { return text::format_double(x); });
}

std::vector<double> gather(const std::vector<double>& values, std::span<const std::size_t> idx) {
  std::vector<double> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = values[idx[i]];
  return out;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

void summarize(VariantSummary& s, const std::vector<const metrics::MetricsReport*>& runs) {
  std::vector<double> mae, mse, r2, nde;
  for (const metrics::MetricsReport* r : runs) {
    mae.push_back(r->mae);
    mse.push_back(r->mse);
    r2.push_back(r->r2);
    nde.push_back(r->nde);
  }
  s.mean = {mean_of(mae), mean_of(mse), mean_of(r2), mean_of(nde), runs.front()->n};
  s.std = {std_of(mae), std_of(mse), std_of(r2), std_of(nde), runs.front()->n};
}

// Score per metric where lower is better.
std::array<double, 4> scores(const metrics::MetricsReport& m) { return {m.mae, m.mse, -m.r2, m.nde}; }

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

struct Evaluation {
  std::vector<std::size_t> centers;
  std::vector<double> y_true;
};

std::vector<double> denormalized_predictions(const models::TrainedModel& model, const WindowedDataset& windows,
                                             const pipeline::RobustScaleParams& target) {
  const std::vector<float> pred = models::predict(model, windows);
  std::vector<double> out(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) out[i] = target.inverse(static_cast<double>(pred[i]));
  return out;
}

int epochs_run(const models::TrainedModel& m) { return m.log.empty() ? 0 : m.log.back().epoch; }

models::TrainOpts opts_for(const ScenarioConfig& cfg, std::uint64_t seed) {
  models::TrainOpts o = cfg.train;
  o.seed = seed;
  return o;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

// Evenly spaced subsample of at most `limit` row indices.
std::vector<std::size_t> even_subsample(std::size_t n, std::size_t limit) {
  if (n <= limit) return all_indices(n);
  std::vector<std::size_t> v(limit);
  for (std::size_t i = 0; i < limit; ++i) v[i] = i * n / limit;
  return v;
}

struct FacilityRun {
  WindowedDataset train;
  WindowedDataset val;
};

// Windows of every member split with the shared index split.
FacilityRun recipe_windows(const Recipe& recipe, const ScenarioConfig& cfg, const pipeline::SplitIndices& split,
                           const RecipeScaling& scaling) {
  std::vector<WindowedDataset> parts_train, parts_val;
  for (std::size_t i = 0; i < recipe.members.size(); ++i) {
    const WindowedDataset w = normalized_windows(recipe.members[i].data, cfg.target, scaling.members[i], cfg.window);
    parts_train.push_back(pipeline::subset(w, split.train));
    parts_val.push_back(pipeline::subset(w, split.val));
  }
  auto cat = [](const std::vector<WindowedDataset>& parts) {
    std::vector<const WindowedDataset*> ptr;
    for (const auto& p : parts) ptr.push_back(&p);
    return pipeline::concat(ptr);
  };
  return {cat(parts_train), cat(parts_val)};
}

std::vector<double> recipe_target_values(const Recipe& recipe, const ScenarioConfig& cfg,
                                         const RecipeScaling& scaling) {
  std::vector<double> out;
  for (std::size_t i = 0; i < recipe.members.size(); ++i) {
    const std::vector<double>& v = recipe.members[i].data.appliance(cfg.target).values;
    if (cfg.divergence_space == DivergenceSpace::Raw) {
      out.insert(out.end(), v.begin(), v.end());
    } else {
      const std::vector<double> z = pipeline::transform(scaling.members[i].target, v);
      out.insert(out.end(), z.begin(), z.end());
    }
  }
  return out;
}

std::vector<DivergenceRow> divergence_table(const std::vector<Recipe>& recipes, const FacilityDataset& base,
                                            const FacilityDataset& extra, const FacilityDataset& test,
                                            const ScenarioConfig& cfg) {
  const std::vector<std::size_t> samples = all_indices(base.size());
  std::map<std::string, ScalerPair> scalers;
  scalers[base.id] = fit_scalers(base, cfg.target, samples);
  scalers[extra.id] = fit_scalers(extra, cfg.target, samples);
  const ScalerPair test_own = fit_scalers(test, cfg.target, all_indices(test.size()));
  std::vector<DivergenceRow> rows;
  for (const Recipe& r : recipes) {
    const RecipeScaling scaling = recipe_scaling(r, cfg, samples, scalers);
    std::vector<double> test_values = test.appliance(cfg.target).values;
    if (cfg.divergence_space == DivergenceSpace::Normalized) {
      test_values = pipeline::transform(scaling.test.value_or(test_own).target, test_values);
    }
    DivergenceRow row;
    row.recipe = r.name;
    row.report = metrics::histogram_divergence(recipe_target_values(r, cfg, scaling), test_values,
                                               cfg.divergence_bins, cfg.divergence_eps);
    rows.push_back(row);
  }
  const DivergenceRow& ref = rows.front();
  const double kl0 = ref.report.kl;
  const double js0 = ref.report.js;
  for (DivergenceRow& row : rows) {
    row.kl_reduction_pct = kl0 > 0 ? 100.0 * (1.0 - row.report.kl / kl0) : 0.0;
    row.js_reduction_pct = js0 > 0 ? 100.0 * (1.0 - row.report.js / js0) : 0.0;
  }
  return rows;
}

std::vector<double> target_window_rows(const FacilityDataset& ds, const ScenarioConfig& cfg) {
  const std::vector<double>& v = ds.appliance(cfg.target).values;
  const WindowedDataset w = pipeline::make_windows(v, v, cfg.window);
  return std::vector<double>(w.inputs.begin(), w.inputs.end());
}

std::vector<PcaPoint> pca_export(const std::vector<std::pair<std::string, std::vector<const FacilityDataset*>>>& sets,
                                 const ScenarioConfig& cfg) {
  const std::size_t w = cfg.window.window_len;
  std::vector<std::vector<double>> rows(sets.size());
  for (std::size_t s = 0; s < sets.size(); ++s) {
    std::vector<double> pooled;
    for (const FacilityDataset* ds : sets[s].second) {
      const std::vector<double> r = target_window_rows(*ds, cfg);
      pooled.insert(pooled.end(), r.begin(), r.end());
    }
    for (std::size_t i : even_subsample(pooled.size() / w, cfg.pca_rows)) {
      rows[s].insert(rows[s].end(), pooled.begin() + static_cast<std::ptrdiff_t>(i * w),
                     pooled.begin() + static_cast<std::ptrdiff_t>((i + 1) * w));
    }
  }
  std::vector<double> all;
  for (const auto& r : rows) all.insert(all.end(), r.begin(), r.end());
  const metrics::PcaProjection fit = metrics::pca_project_2d(all, w);
  std::vector<PcaPoint> out;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    for (const auto& c : metrics::pca_apply(fit, rows[s])) out.push_back({sets[s].first, c[0], c[1]});
  }
  return out;
}

void size_columns(VariantSummary& v, const Recipe& r, std::size_t base_samples) {
  std::vector<augment::MemberRef> refs;
  for (const RecipeMember& m : r.members) refs.push_back({&m.data, m.plan});
  const augment::ComposedTrainingSet set = augment::compose_training_set(refs, base_samples);
  v.train_samples = set.total_samples;
  v.relative_increase = set.relative_increase;
}

void assign_average_ranks(std::vector<VariantSummary>& variants,
                          const std::vector<std::vector<metrics::MetricsReport>>& per_block) {
  // per_block[v][b]: variant v's metrics on test block b.
  const std::size_t blocks = per_block.front().size();
  std::vector<double> sum(variants.size(), 0.0);
  std::size_t count = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t m = 0; m < 4; ++m) {
      std::vector<double> col(variants.size());
      for (std::size_t v = 0; v < variants.size(); ++v) col[v] = scores(per_block[v][b])[m];
      const std::vector<double> ranks = metrics::fractional_ranks(col);
      for (std::size_t v = 0; v < variants.size(); ++v) sum[v] += ranks[v];
      ++count;
    }
  }
  for (std::size_t v = 0; v < variants.size(); ++v) variants[v].average_rank = sum[v] / static_cast<double>(count);
}

void check_target(const FacilityDataset& ds, ApplianceKind target) {
  const auto& v = ds.appliance(target).values;
  if (v.size() != ds.size() || std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) {
    throw DataError("target appliance " + std::string(name_of(target)) + " is missing or all zero in '" + ds.id + "'");
  }
}

}  // namespace

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::ApplianceVariation: return "appliance-variation";
    case Scenario::FacilityVariation: return "facility-variation";
    case Scenario::DistributionAlignment: return "alignment";
  }
  return "?";
}

Scenario parse_scenario(const std::string& text) {
  if (text == "appliance-variation") return Scenario::ApplianceVariation;
  if (text == "facility-variation") return Scenario::FacilityVariation;
  if (text == "alignment" || text == "distribution-alignment") return Scenario::DistributionAlignment;
  throw ConfigError("unknown scenario '" + text + "'");
}

std::string to_string(ScalerPolicy p) {
  switch (p) {
    case ScalerPolicy::Pooled: return "pooled";
    case ScalerPolicy::Source: return "source";
    case ScalerPolicy::Own: return "own";
  }
  return "?";
}

ScalerPolicy parse_scaler_policy(const std::string& text) {
  if (text == "pooled") return ScalerPolicy::Pooled;
  if (text == "source") return ScalerPolicy::Source;
  if (text == "own") return ScalerPolicy::Own;
  throw ConfigError("scaler policy must be pooled, source or own, got '" + text + "'");
}

std::vector<double> default_variation_grid() {
  std::vector<double> g(11);
  for (int i = 0; i <= 10; ++i) g[static_cast<std::size_t>(i)] = i / 5.0;
  return g;
}

void ScenarioConfig::validate() const {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (months_of_data < 1 || start_month < 1 || start_month + months_of_data - 1 > 12) {
    throw ConfigError("months must lie inside one calendar year (start_month " + std::to_string(start_month) +
                      ", months " + std::to_string(months_of_data) + ")");
  }
  if (resample_period <= 0 || calendar::kSecondsPerDay % resample_period != 0) {
    throw ConfigError("resample period must divide one day");
  }
  window.validate();
  if (model.input_len != window.window_len || model.center_index != window.center_index) {
    throw ConfigError("model input length and center must match the window spec");
  }
  model.validate();
  train.validate();
  for (const std::string* name : {&train_facility, &enlarge_facility, &test_facility}) sim::preset(*name);
  double sum = 0.0;
  for (double f : av_split) sum += f;
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("appliance-variation split fractions must sum to 1");
  if (std::abs(fv_split[0] + fv_split[1] - 1.0) > 1e-9) {
    throw ConfigError("facility-variation split fractions must sum to 1");
  }
  if (av_amda_s.empty()) throw ConfigError("appliance variation needs at least one AMDA s value");
  for (double s : av_amda_s) {
    if (!(s >= 0.0)) throw ConfigError("AMDA s values must be non-negative");
  }
  if (!(amda_s >= 0.0)) throw ConfigError("AMDA s must be non-negative");
  if (variation_grid.empty()) throw ConfigError("variation grid is empty");
  if (rdm_factors.empty()) throw ConfigError("RDM needs at least one factor");
  if (divergence_bins == 0) throw ConfigError("divergence bins must be positive");
  if (pca_rows < 2) throw ConfigError("pca rows must be >= 2");
}

void ScenarioConfig::set(const std::string& key, const std::string& value) {
  const std::string& k = key;
  auto month = [&](const std::string& v) { return static_cast<int>(text::parse_int(v, k)); };
  if (k == "scenario") scenario = parse_scenario(value);
  else if (k == "target") target = parse_appliance(value);
  else if (k == "seeds") seeds = text::parse_uint_list(value, k);
  else if (k == "repetitions") {
    const std::uint64_t n = text::parse_uint(value, k);
    if (n == 0) throw ConfigError("repetitions must be positive");
    seeds.resize(n);
    std::iota(seeds.begin(), seeds.end(), std::uint64_t{1});
  }
  else if (k == "data_seed") data_seed = text::parse_uint(value, k);
  else if (k == "months") months_of_data = month(value);
  else if (k == "start_month") start_month = month(value);
  else if (k == "resample_period") resample_period = month(value);
  else if (k == "window.length") window.window_len = model.input_len = text::parse_uint(value, k);
  else if (k == "window.stride") window.stride = text::parse_uint(value, k);
  else if (k == "window.center") window.center_index = model.center_index = text::parse_uint(value, k);
  else if (k == "model.arch") model.arch = models::parse_arch(value);
  else if (k == "model.hidden") {
    model.hidden_sizes.clear();
    for (std::uint64_t h : text::parse_uint_list(value, k)) model.hidden_sizes.push_back(h);
  }
  else if (k == "model.channels") model.conv.channels = text::parse_uint(value, k);
  else if (k == "model.kernel") model.conv.kernel = text::parse_uint(value, k);
  else if (k == "model.dilations") {
    model.conv.dilations.clear();
    for (std::uint64_t d : text::parse_uint_list(value, k)) model.conv.dilations.push_back(d);
  }
  else if (k == "model.dropout") model.conv.dropout = text::parse_double(value, k);
  else if (k == "train.learning_rate") train.learning_rate = text::parse_double(value, k);
  else if (k == "train.batch_size") train.batch_size = text::parse_uint(value, k);
  else if (k == "train.max_epochs") train.max_epochs = static_cast<int>(text::parse_int(value, k));
  else if (k == "train.patience") train.patience = static_cast<int>(text::parse_int(value, k));
  else if (k == "train_facility") train_facility = value;
  else if (k == "enlarge_facility") enlarge_facility = value;
  else if (k == "test_facility") test_facility = value;
  else if (k == "av.split") {
    const std::vector<double> f = text::parse_double_list(value, k);
    if (f.size() != 3) throw ConfigError("av.split needs three fractions");
    av_split = {f[0], f[1], f[2]};
  }
  else if (k == "av.amda_s") av_amda_s = text::parse_double_list(value, k);
  else if (k == "av.varied") varied = parse_appliance(value);
  else if (k == "av.grid") variation_grid = text::parse_double_list(value, k);
  else if (k == "fv.split") {
    const std::vector<double> f = text::parse_double_list(value, k);
    if (f.size() != 2) throw ConfigError("fv.split needs two fractions");
    fv_split = {f[0], f[1]};
  }
  else if (k == "fv.amda_s") amda_s = text::parse_double(value, k);
  else if (k == "fv.rdm_factors") rdm_factors = text::parse_double_list(value, k);
  else if (k == "fv.mp_seed_offset") mp_seed_offset = text::parse_uint(value, k);
  else if (k == "scaler") scaler = parse_scaler_policy(value);
  else if (k == "renormalize_aggregate") renormalize_aggregate = text::parse_bool(value, k);
  else if (k == "divergence.space") {
    if (value == "raw") divergence_space = DivergenceSpace::Raw;
    else if (value == "normalized") divergence_space = DivergenceSpace::Normalized;
    else throw ConfigError("divergence.space must be raw or normalized");
  }
  else if (k == "divergence.bins") divergence_bins = text::parse_uint(value, k);
  else if (k == "divergence.eps") divergence_eps = text::parse_double(value, k);
  else if (k == "pca.rows") pca_rows = text::parse_uint(value, k);
  else throw ConfigError("unknown scenario setting '" + k + "'");
}

std::vector<std::pair<std::string, std::string>> ScenarioConfig::settings() const {
  auto u = [](std::uint64_t v) { return std::to_string(v); };
  auto d = [](double v) { return text::format_double(v); };
  auto ulist = [](const auto& v) { return text::join(v, ",", [](auto x) { return std::to_string(x); }); };
  return {
      {"scenario", to_string(scenario)},
      {"target", std::string(name_of(target))},
      {"seeds", ulist(seeds)},
      {"data_seed", u(data_seed)},
      {"months", std::to_string(months_of_data)},
      {"start_month", std::to_string(start_month)},
      {"resample_period", std::to_string(resample_period)},
      {"window.length", u(window.window_len)},
      {"window.stride", u(window.stride)},
      {"window.center", u(window.center_index)},
      {"model.arch", models::to_string(model.arch)},
      {"model.hidden", ulist(model.hidden_sizes)},
      {"model.channels", u(model.conv.channels)},
      {"model.kernel", u(model.conv.kernel)},
      {"model.dilations", ulist(model.conv.dilations)},
      {"model.dropout", d(model.conv.dropout)},
      {"train.learning_rate", d(train.learning_rate)},
      {"train.batch_size", u(train.batch_size)},
      {"train.max_epochs", std::to_string(train.max_epochs)},
      {"train.patience", std::to_string(train.patience)},
      {"train_facility", train_facility},
      {"enlarge_facility", enlarge_facility},
      {"test_facility", test_facility},
      {"av.split", format_list({av_split.begin(), av_split.end()})},
      {"av.amda_s", format_list(av_amda_s)},
      {"av.varied", std::string(name_of(varied))},
      {"av.grid", format_list(variation_grid)},
      {"fv.split", format_list({fv_split.begin(), fv_split.end()})},
      {"fv.amda_s", d(amda_s)},
      {"fv.rdm_factors", format_list(rdm_factors)},
      {"fv.mp_seed_offset", u(mp_seed_offset)},
      {"scaler", to_string(scaler)},
      {"renormalize_aggregate", renormalize_aggregate ? "true" : "false"},
      {"divergence.space", divergence_space_name(divergence_space)},
      {"divergence.bins", u(divergence_bins)},
      {"divergence.eps", d(divergence_eps)},
      {"pca.rows", u(pca_rows)},
  };
}

FacilityDataset load_facility(const std::string& preset, std::uint64_t seed, const ScenarioConfig& cfg) {
  sim::FacilityConfig fc = sim::preset(preset);
  fc.seed = seed;
  FacilityDataset ds = pipeline::resample(sim::simulate_facility(fc), cfg.resample_period);
  const auto per_day = static_cast<std::size_t>(calendar::kSecondsPerDay / cfg.resample_period);
  const int first = calendar::first_day_of_month(cfg.start_month);
  const int end_month = cfg.start_month + cfg.months_of_data;
  const int last = end_month > 12 ? calendar::kDaysPerYear : calendar::first_day_of_month(end_month);
  return pipeline::slice(ds, static_cast<std::size_t>(first) * per_day,
                         static_cast<std::size_t>(last - first) * per_day);
}

FacilityDataset scale_appliance(const FacilityDataset& ds, ApplianceKind kind, double s) {
  FacilityDataset out = ds;
  for (double& v : out.appliance(kind).values) v *= s;
  out.recompute_aggregate();
  return out;
}

ScalerPair fit_scalers(const FacilityDataset& ds, ApplianceKind target, std::span<const std::size_t> samples) {
  return fit_pooled_scalers({&ds}, target, samples);
}

ScalerPair fit_pooled_scalers(const std::vector<const FacilityDataset*>& datasets, ApplianceKind target,
                              std::span<const std::size_t> samples) {
  if (datasets.empty()) throw DataError("no datasets to fit scalers on");
  std::vector<double> agg, tgt;
  for (const FacilityDataset* ds : datasets) {
    for (std::size_t i : samples) {
      if (i >= ds->size()) throw DataError("scaler sample index out of range for '" + ds->id + "'");
    }
    const std::vector<double> a = gather(ds->aggregate, samples);
    const std::vector<double> t = gather(ds->appliance(target).values, samples);
    agg.insert(agg.end(), a.begin(), a.end());
    tgt.insert(tgt.end(), t.begin(), t.end());
  }
  const std::string id = datasets.front()->id + (datasets.size() > 1 ? "+pool" : "");
  return {pipeline::fit_scaler(agg, id + "/aggregate"), pipeline::fit_scaler(tgt, id + "/" + std::string(name_of(target)))};
}

RecipeScaling recipe_scaling(const Recipe& recipe, const ScenarioConfig& cfg, std::span<const std::size_t> samples,
                             const std::map<std::string, ScalerPair>& sources) {
  RecipeScaling s;
  if (cfg.scaler == ScalerPolicy::Pooled) {
    std::vector<const FacilityDataset*> ds;
    for (const RecipeMember& m : recipe.members) ds.push_back(&m.data);
    const ScalerPair pooled = fit_pooled_scalers(ds, cfg.target, samples);
    s.members.assign(recipe.members.size(), pooled);
    s.test = pooled;
    return s;
  }
  for (const RecipeMember& m : recipe.members) {
    const auto it = sources.find(m.scaler_source);
    if (it == sources.end()) throw DataError("no scaler for configuration '" + m.scaler_source + "'");
    s.members.push_back(cfg.scaler == ScalerPolicy::Own && m.plan ? fit_scalers(m.data, cfg.target, samples)
                                                                  : it->second);
  }
  return s;
}

WindowedDataset normalized_windows(const FacilityDataset& ds, ApplianceKind target, const ScalerPair& scalers,
                                   const pipeline::WindowSpec& spec) {
  return pipeline::make_windows(pipeline::transform(scalers.aggregate, ds.aggregate),
                                pipeline::transform(scalers.target, ds.appliance(target).values), spec,
                                ds.timeline());
}

std::vector<std::size_t> window_centers(std::span<const std::size_t> windows, const pipeline::WindowSpec& spec) {
  std::vector<std::size_t> c(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) c[i] = windows[i] * spec.stride + spec.center_index;
  return c;
}

std::vector<Recipe> build_recipes(const FacilityDataset& base, const FacilityDataset& extra,
                                  const ScenarioConfig& cfg) {
  auto original = [](const FacilityDataset& ds) { return RecipeMember{ds, ds.id, std::nullopt}; };
  auto amda_copy = [&](const FacilityDataset& ds) {
    augment::AugmentedDataset a = augment::amda_augment(ds, cfg.amda_s, cfg.renormalize_aggregate);
    return RecipeMember{std::move(a.dataset), ds.id, a.plan};
  };
  std::vector<Recipe> r;
  r.push_back({kBase, {original(base)}});
  r.push_back({kEnlarged, {original(base), original(extra)}});
  Recipe rdm{kRdm, {original(base)}};
  for (augment::AugmentedDataset& a : augment::rdm_augment(base, cfg.rdm_factors)) {
    rdm.members.push_back({std::move(a.dataset), base.id, a.plan});
  }
  r.push_back(std::move(rdm));
  r.push_back({kBaseStar, {original(base), amda_copy(base)}});
  r.push_back({kEnlargedStar, {original(base), original(extra), amda_copy(base), amda_copy(extra)}});
  return r;
}

const VariantSummary& ScenarioReport::variant(const std::string& name) const {
  for (const VariantSummary& v : variants) {
    if (v.name == name) return v;
  }
  throw DataError("no variant named '" + name + "' in report");
}

const DivergenceRow& ScenarioReport::divergence_row(const std::string& recipe) const {
  for (const DivergenceRow& d : divergence) {
    if (d.recipe == recipe) return d;
  }
  throw DataError("no divergence row for '" + recipe + "' in report");
}

ScenarioReport run_appliance_variation(const ScenarioConfig& cfg) {
  cfg.validate();
  ScenarioReport rep;
  rep.scenario = Scenario::ApplianceVariation;
  rep.settings = cfg.settings();
  rep.notes = {
      {"test_aggregate", "recomputed as the column sum after scaling " + std::string(name_of(cfg.varied))},
      {"scalers", "fitted on training-split window centers"},
      {"augmentation_statistics", "relative contributions from training-split window centers"},
      {"scaler", to_string(cfg.scaler)},
      {"denormalization", "target appliance scaler"},
  };

  const FacilityDataset base = load_facility(cfg.train_facility, cfg.data_seed, cfg);
  check_target(base, cfg.target);
  check_target(base, cfg.varied);
  const std::size_t n_windows = pipeline::window_count(base.size(), cfg.window);
  const std::string plain = models::to_string(cfg.model.arch);
  const std::string augmented = plain + "*";

  std::vector<VariantSummary> variants(2);
  variants[0].name = plain;
  variants[1].name = augmented;
  // per (variant, grid point): one metrics report per seed
  std::vector<std::vector<std::vector<metrics::MetricsReport>>> grid_runs(
      2, std::vector<std::vector<metrics::MetricsReport>>(cfg.variation_grid.size()));

  for (std::uint64_t seed : cfg.seeds) {
    const pipeline::SplitIndices split = pipeline::split_indices(n_windows, cfg.av_split, seed);
    const std::vector<std::size_t> train_centers = window_centers(split.train, cfg.window);
    const ScalerPair sc = fit_scalers(base, cfg.target, train_centers);
    const std::map<std::string, ScalerPair> sources{{base.id, sc}};

    const augment::ContributionVector p = augment::relative_contributions(base, train_centers);
    std::array<Recipe, 2> pools{Recipe{plain, {RecipeMember{base, base.id, std::nullopt}}},
                                Recipe{augmented, {RecipeMember{base, base.id, std::nullopt}}}};
    for (double s : cfg.av_amda_s) {
      augment::AugmentedDataset a = augment::amda_augment(base, s, cfg.renormalize_aggregate, p);
      pools[1].members.push_back({std::move(a.dataset), base.id, a.plan});
    }

    std::array<models::TrainedModel, 2> trained;
    std::array<ScalerPair, 2> eval_sc;
    std::array<WindowedDataset, 2> untouched_test;
    for (std::size_t v = 0; v < 2; ++v) {
      const RecipeScaling scaling = recipe_scaling(pools[v], cfg, train_centers, sources);
      const FacilityRun data = recipe_windows(pools[v], cfg, split, scaling);
      // Held-out windows come from the original facility; its own training scaler applies otherwise.
      eval_sc[v] = scaling.test.value_or(sc);
      untouched_test[v] =
          pipeline::subset(normalized_windows(base, cfg.target, eval_sc[v], cfg.window), split.test);
      const Timer t;
      trained[v] = models::train(cfg.model, data.train, data.val, opts_for(cfg, seed));
      rep.timing.emplace_back(variants[v].name + " seed " + std::to_string(seed), t.seconds());
      variants[v].train_windows = data.train.size();
      variants[v].val_windows = data.val.size();
      size_columns(variants[v], pools[v], base.size());
    }

    for (std::size_t g = 0; g < cfg.variation_grid.size(); ++g) {
      const double s = cfg.variation_grid[g];
      const FacilityDataset modified = scale_appliance(base, cfg.varied, s);
      const std::vector<double> y_true =
          gather(modified.appliance(cfg.target).values, window_centers(split.test, cfg.window));
      for (std::size_t v = 0; v < 2; ++v) {
        const WindowedDataset test =
            pipeline::subset(normalized_windows(modified, cfg.target, eval_sc[v], cfg.window), split.test);
        if (s == 1.0 && (test.inputs != untouched_test[v].inputs || test.targets != untouched_test[v].targets)) {
          throw NumericError("identity-scaled test set differs from the untouched test split");
        }
        RunRecord r;
        r.variant = variants[v].name;
        r.seed = seed;
        r.s = s;
        r.metrics = metrics::regression_metrics(y_true, denormalized_predictions(trained[v], test, eval_sc[v].target));
        r.best_epoch = trained[v].best_epoch;
        r.epochs_run = epochs_run(trained[v]);
        grid_runs[v][g].push_back(r.metrics);
        rep.runs.push_back(r);
      }
    }
  }

  std::vector<std::vector<metrics::MetricsReport>> block_means(2);
  for (std::size_t v = 0; v < 2; ++v) {
    std::vector<const metrics::MetricsReport*> flat;
    for (std::size_t g = 0; g < cfg.variation_grid.size(); ++g) {
      std::vector<double> nde;
      std::vector<const metrics::MetricsReport*> at_g;
      for (const auto& m : grid_runs[v][g]) {
        flat.push_back(&m);
        at_g.push_back(&m);
        nde.push_back(m.nde);
      }
      rep.curve.push_back({variants[v].name, cfg.variation_grid[g], mean_of(nde), std_of(nde), nde.size()});
      VariantSummary tmp;
      summarize(tmp, at_g);
      block_means[v].push_back(tmp.mean);
    }
    summarize(variants[v], flat);
    variants[v].repetitions = cfg.seeds.size();
    variants[v].macs_per_window = cfg.model.macs_per_window();
  }
  assign_average_ranks(variants, block_means);
  rep.variants = std::move(variants);
  return rep;
}

ScenarioReport run_facility_variation(const ScenarioConfig& cfg) {
  cfg.validate();
  ScenarioReport rep;
  rep.scenario = Scenario::FacilityVariation;
  rep.settings = cfg.settings();
  rep.notes = {
      {"scalers", "fitted on training-split window centers"},
      {"scaler", to_string(cfg.scaler)},
      {"test_scaler", cfg.scaler == ScalerPolicy::Pooled
                          ? "training-pool scaler"
                          : "test configuration's own scaler, fitted on the whole test period; MP uses its training scaler"},
      {"mp_training_data", "independent realization of the test configuration (seed offset " +
                               std::to_string(cfg.mp_seed_offset) + ")"},
      {"denormalization", "target appliance scaler"},
      {"divergence_space", divergence_space_name(cfg.divergence_space)},
  };

  const FacilityDataset base = load_facility(cfg.train_facility, cfg.data_seed, cfg);
  const FacilityDataset extra = load_facility(cfg.enlarge_facility, cfg.data_seed, cfg);
  const FacilityDataset test = load_facility(cfg.test_facility, cfg.data_seed, cfg);
  const FacilityDataset mp = load_facility(cfg.test_facility, cfg.data_seed + cfg.mp_seed_offset, cfg);
  for (const FacilityDataset* ds : {&base, &extra, &test, &mp}) check_target(*ds, cfg.target);
  const std::vector<Recipe> recipes = build_recipes(base, extra, cfg);

  const std::size_t n_windows = pipeline::window_count(base.size(), cfg.window);
  const ScalerPair test_own = fit_scalers(test, cfg.target, all_indices(test.size()));
  const std::vector<double> y_true = gather(test.appliance(cfg.target).values,
                                            window_centers(all_indices(pipeline::window_count(test.size(), cfg.window)),
                                                           cfg.window));

  std::vector<VariantSummary> variants(recipes.size() + 1);
  for (std::size_t r = 0; r < recipes.size(); ++r) {
    variants[r].name = recipes[r].name;
    size_columns(variants[r], recipes[r], base.size());
  }
  variants.back().name = kMp;
  variants.back().train_samples = mp.size();
  variants.back().relative_increase =
      100.0 * (static_cast<double>(mp.size()) / static_cast<double>(base.size()) - 1.0);
  std::vector<std::vector<metrics::MetricsReport>> per_seed(variants.size());

  auto evaluate = [&](std::size_t v, std::uint64_t seed, const FacilityRun& data, const ScalerPair& test_sc) {
    const Timer t;
    const models::TrainedModel model = models::train(cfg.model, data.train, data.val, opts_for(cfg, seed));
    rep.timing.emplace_back(variants[v].name + " seed " + std::to_string(seed), t.seconds());
    const WindowedDataset test_in = normalized_windows(test, cfg.target, test_sc, cfg.window);
    RunRecord r;
    r.variant = variants[v].name;
    r.seed = seed;
    r.metrics = metrics::regression_metrics(y_true, denormalized_predictions(model, test_in, test_sc.target));
    r.best_epoch = model.best_epoch;
    r.epochs_run = epochs_run(model);
    per_seed[v].push_back(r.metrics);
    rep.runs.push_back(r);
    variants[v].train_windows = data.train.size();
    variants[v].val_windows = data.val.size();
  };

  for (std::uint64_t seed : cfg.seeds) {
    const pipeline::SplitIndices split =
        pipeline::split_indices(n_windows, {cfg.fv_split[0], cfg.fv_split[1], 0.0}, seed);
    const std::vector<std::size_t> train_centers = window_centers(split.train, cfg.window);
    std::map<std::string, ScalerPair> scalers;
    scalers[base.id] = fit_scalers(base, cfg.target, train_centers);
    scalers[extra.id] = fit_scalers(extra, cfg.target, train_centers);
    for (std::size_t r = 0; r < recipes.size(); ++r) {
      const RecipeScaling scaling = recipe_scaling(recipes[r], cfg, train_centers, scalers);
      evaluate(r, seed, recipe_windows(recipes[r], cfg, split, scaling), scaling.test.value_or(test_own));
    }
    // MP was trained on the test configuration, so its training scaler applies to the test period.
    const ScalerPair mp_sc = fit_scalers(mp, cfg.target, train_centers);
    const WindowedDataset mp_all = normalized_windows(mp, cfg.target, mp_sc, cfg.window);
    evaluate(variants.size() - 1, seed, {pipeline::subset(mp_all, split.train), pipeline::subset(mp_all, split.val)},
             mp_sc);
  }

  std::vector<std::vector<double>> nde_scores(variants.size());
  std::vector<std::string> names;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    std::vector<const metrics::MetricsReport*> runs;
    for (const auto& m : per_seed[v]) {
      runs.push_back(&m);
      nde_scores[v].push_back(m.nde);
    }
    summarize(variants[v], runs);
    variants[v].repetitions = runs.size();
    variants[v].macs_per_window = cfg.model.macs_per_window();
    names.push_back(variants[v].name);
  }
  assign_average_ranks(variants, per_seed);
  if (variants.size() >= 3 && cfg.seeds.size() >= 2) {
    rep.ranks = metrics::friedman_nemenyi(nde_scores, 0.05, names);
  }
  rep.variants = std::move(variants);
  rep.divergence = divergence_table(recipes, base, extra, test, cfg);
  return rep;
}

ScenarioReport run_distribution_alignment(const ScenarioConfig& cfg) {
  cfg.validate();
  ScenarioReport rep;
  rep.scenario = Scenario::DistributionAlignment;
  rep.settings = cfg.settings();
  rep.notes = {
      {"divergence_space", divergence_space_name(cfg.divergence_space)},
      {"divergence_samples", "target appliance samples of every recipe member vs. the test configuration"},
      {"scaler", to_string(cfg.scaler)},
      {"projection", "principal components of raw target-appliance windows, fitted on all exported sets"},
  };
  const FacilityDataset base = load_facility(cfg.train_facility, cfg.data_seed, cfg);
  const FacilityDataset extra = load_facility(cfg.enlarge_facility, cfg.data_seed, cfg);
  const FacilityDataset test = load_facility(cfg.test_facility, cfg.data_seed, cfg);
  for (const FacilityDataset* ds : {&base, &extra, &test}) check_target(*ds, cfg.target);
  const std::vector<Recipe> recipes = build_recipes(base, extra, cfg);
  for (const Recipe& r : recipes) {
    if (r.members.empty()) throw ConfigError("recipe '" + r.name + "' is empty");
    VariantSummary v;
    v.name = r.name;
    size_columns(v, r, base.size());
    rep.variants.push_back(v);
  }
  rep.divergence = divergence_table(recipes, base, extra, test, cfg);

  const Recipe& base_star = recipes[3];
  std::vector<const FacilityDataset*> star_sets;
  for (const RecipeMember& m : base_star.members) star_sets.push_back(&m.data);
  rep.pca = pca_export({{kBase, {&base}}, {kBaseStar, star_sets}, {"test", {&test}}}, cfg);
  return rep;
}

ScenarioReport run(const ScenarioConfig& cfg) {
  switch (cfg.scenario) {
    case Scenario::ApplianceVariation: return run_appliance_variation(cfg);
    case Scenario::FacilityVariation: return run_facility_variation(cfg);
    case Scenario::DistributionAlignment: return run_distribution_alignment(cfg);
  }
  throw ConfigError("unknown scenario");
}

namespace {

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const std::string& l : lines) out << l << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

std::string tsv(std::initializer_list<std::string> fields) {
  return text::join(fields, "\t", [](const std::string& s) { return s; });
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

}  // namespace

WrittenReport write_report(const ScenarioReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  WrittenReport out;
  using text::format_double;
  auto add = [&](const std::string& name, const std::vector<std::string>& lines) {
    write_lines(dir / name, lines);
    out.files.push_back(dir / name);
  };

  std::vector<std::string> lines;
  for (const auto& [k, v] : report.settings) lines.push_back(k + " = " + v);
  add("settings.txt", lines);

  lines.clear();
  for (const auto& [k, v] : report.notes) lines.push_back(k + " = " + v);
  add("notes.txt", lines);

  lines = {tsv({"variant", "repetitions", "mae_mw", "mae_std", "mse_mw2", "mse_std", "r2", "r2_std", "nde", "nde_std",
                "train_samples", "relative_increase_pct", "train_windows", "val_windows", "macs_per_window",
                "average_rank"})};
  for (const VariantSummary& v : report.variants) {
    lines.push_back(tsv({v.name, std::to_string(v.repetitions), format_double(v.mean.mae), format_double(v.std.mae),
                         format_double(v.mean.mse), format_double(v.std.mse), format_double(v.mean.r2),
                         format_double(v.std.r2), format_double(v.mean.nde), format_double(v.std.nde),
                         std::to_string(v.train_samples), format_double(v.relative_increase),
                         std::to_string(v.train_windows), std::to_string(v.val_windows),
                         std::to_string(v.macs_per_window), format_double(v.average_rank)}));
  }
  add("metrics.tsv", lines);

  if (!report.runs.empty()) {
    lines = {tsv({"variant", "seed", "s", "mae_mw", "mse_mw2", "r2", "nde", "n", "best_epoch", "epochs_run"})};
    for (const RunRecord& r : report.runs) {
      lines.push_back(tsv({r.variant, std::to_string(r.seed), r.s ? format_double(*r.s) : "-",
                           format_double(r.metrics.mae), format_double(r.metrics.mse), format_double(r.metrics.r2),
                           format_double(r.metrics.nde), std::to_string(r.metrics.n), std::to_string(r.best_epoch),
                           std::to_string(r.epochs_run)}));
    }
    add("runs.tsv", lines);
  }

  if (!report.curve.empty()) {
    lines = {tsv({"variant", "s", "nde_mean", "nde_std", "repetitions"})};
    for (const CurvePoint& c : report.curve) {
      lines.push_back(tsv({c.variant, format_double(c.s), format_double(c.mean_nde), format_double(c.std_nde),
                           std::to_string(c.repetitions)}));
    }
    add("curve.tsv", lines);
  }

  if (report.ranks) {
    const metrics::RankReport& r = *report.ranks;
    lines = {tsv({"method", "average_rank", "critical_difference"})};
    for (std::size_t i = 0; i < r.methods.size(); ++i) {
      lines.push_back(tsv({r.methods[i], format_double(r.average_rank[i]), format_double(r.critical_difference)}));
    }
    add("ranks.tsv", lines);
    lines = {"friedman_statistic = " + format_double(r.friedman_statistic),
             "p_value = " + format_double(r.p_value), "alpha = " + format_double(r.alpha),
             "critical_difference = " + format_double(r.critical_difference),
             "blocks = " + std::to_string(r.n_blocks)};
    for (std::size_t i = 0; i < r.methods.size(); ++i) {
      for (std::size_t j = i + 1; j < r.methods.size(); ++j) {
        lines.push_back("significant." + r.methods[i] + "." + r.methods[j] + " = " +
                        (r.significant[i][j] ? "true" : "false"));
      }
    }
    add("friedman.txt", lines);
  }

  if (!report.divergence.empty()) {
    lines = {tsv({"recipe", "kl", "kl_reverse", "js", "kl_reduction_pct", "js_reduction_pct", "bins",
                  "smoothing_eps"})};
    for (const DivergenceRow& d : report.divergence) {
      lines.push_back(tsv({d.recipe, format_double(d.report.kl), format_double(d.report.kl_reverse),
                           format_double(d.report.js), format_double(d.kl_reduction_pct),
                           format_double(d.js_reduction_pct), std::to_string(d.report.bins),
                           format_double(d.report.smoothing_eps)}));
    }
    add("divergence.tsv", lines);
  }

  if (!report.pca.empty()) {
    lines = {tsv({"set", "pc1", "pc2"})};
    for (const PcaPoint& p : report.pca) lines.push_back(tsv({p.set, format_double(p.x), format_double(p.y)}));
    add("pca.tsv", lines);
  }

  // Human-readable summary.
  lines = {"scenario: " + to_string(report.scenario), ""};
  if (!report.runs.empty()) {
    lines.push_back(pad("variant", 12) + pad("MAE [MW]", 20) + pad("MSE [MW^2]", 22) + pad("R2", 20) +
                    pad("NDE", 20) + pad("avg rank", 10));
    for (const VariantSummary& v : report.variants) {
      auto pm = [](double m, double s) { return text::format_fixed(m, 4) + " +- " + text::format_fixed(s, 4); };
      lines.push_back(pad(v.name, 12) + pad(pm(v.mean.mae, v.std.mae), 20) + pad(pm(v.mean.mse, v.std.mse), 22) +
                      pad(pm(v.mean.r2, v.std.r2), 20) + pad(pm(v.mean.nde, v.std.nde), 20) +
                      pad(text::format_fixed(v.average_rank, 3), 10));
    }
    lines.emplace_back();
  }
  lines.push_back(pad("variant", 12) + pad("samples", 12) + pad("increase", 12) + pad("train win", 12) +
                  pad("MACs/win", 12));
  for (const VariantSummary& v : report.variants) {
    lines.push_back(pad(v.name, 12) + pad(std::to_string(v.train_samples), 12) +
                    pad(text::format_fixed(v.relative_increase, 0) + "%", 12) +
                    pad(std::to_string(v.train_windows), 12) + pad(std::to_string(v.macs_per_window), 12));
  }
  if (!report.divergence.empty()) {
    lines.emplace_back();
    lines.push_back(pad("recipe", 12) + pad("KL", 12) + pad("KL red.", 10) + pad("JS", 12) + pad("JS red.", 10));
    for (const DivergenceRow& d : report.divergence) {
      lines.push_back(pad(d.recipe, 12) + pad(text::format_fixed(d.report.kl, 4), 12) +
                      pad(text::format_fixed(d.kl_reduction_pct, 1) + "%", 10) +
                      pad(text::format_fixed(d.report.js, 4), 12) +
                      pad(text::format_fixed(d.js_reduction_pct, 1) + "%", 10));
    }
  }
  add("report.txt", lines);

  lines.clear();
  for (const auto& [k, v] : report.timing) lines.push_back(k + " = " + text::format_fixed(v, 3));
  write_lines(dir / "timing.txt", lines);
  out.timing = dir / "timing.txt";
  return out;
}

}  // namespace amda::experiments
