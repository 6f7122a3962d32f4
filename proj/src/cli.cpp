#include "amda/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>

#include "amda/augment.hpp"
#include "amda/calendar.hpp"
#include "amda/error.hpp"
#include "amda/experiments.hpp"
#include "amda/io.hpp"
#include "amda/metrics.hpp"
#include "amda/models.hpp"
#include "amda/pipeline.hpp"
#include "amda/sim_core.hpp"
#include "amda/text.hpp"

namespace amda::cli {

namespace {

namespace fs = std::filesystem;
using sim::FacilityDataset;

struct Context {
  std::vector<std::string> args;
  std::ostream& out;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
};

fs::path resolve_out(const std::string& opt) {
  if (!opt.empty()) return opt;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return "amda_out";
}

std::string settings_digest(const std::vector<std::pair<std::string, std::string>>& settings) {
  return io::sha256_hex(io::format_config(settings));
}

// Writes timing.txt and the manifest; prints the manifest path.
void finish(Context& ctx, const fs::path& dir, io::RunManifest m, const std::vector<fs::path>& outputs) {
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - ctx.t0).count();
  io::write_file(dir / "timing.txt", "wall_clock_s = " + text::format_fixed(seconds, 3) + "\n");
  m.tool_version = io::kToolVersion;
  m.command_line = ctx.args;
  m.timing_file = "timing.txt";
  const fs::path path = io::write_manifest(std::move(m), dir, outputs);
  ctx.out << "wrote " << path.string() << "\n";
}

io::FileDigest input_digest(const fs::path& p) { return {p.string(), io::sha256_file(p)}; }

FacilityDataset load_csv(const fs::path& p, bool lenient, std::ostream& out) {
  std::vector<std::string> warnings;
  io::CsvReadOptions opts;
  opts.strict = !lenient;
  FacilityDataset ds = io::read_facility_csv(p, opts, &warnings);
  for (const std::string& w : warnings) out << "warning: " << w << "\n";
  return ds;
}

std::string plan_text(const augment::AugmentationPlan& plan) {
  std::vector<std::pair<std::string, std::string>> s{
      {"method", augment::to_string(plan.method)},
      {"s", text::format_double(plan.s)},
      {"source", plan.source_dataset_id},
      {"seed", plan.seed ? std::to_string(*plan.seed) : "-"},
      {"renormalized", plan.renormalized ? "true" : "false"},
  };
  for (ApplianceKind k : kAllAppliances) {
    s.emplace_back("factor." + std::string(name_of(k)), text::format_double(plan[k]));
  }
  return io::format_config(s);
}

// --- simulate ---------------------------------------------------------------

struct SimulateOpts {
  std::string preset, config, out;
  std::optional<std::uint64_t> seed;
  int period = 0;
  bool list = false;
};

void run_simulate(Context& ctx, const SimulateOpts& o) {
  if (o.list) {
    for (const std::string& n : sim::preset_names()) ctx.out << n << "\n";
    return;
  }
  if (o.preset.empty() == o.config.empty()) throw ConfigError("give exactly one of --preset or --config");
  io::RunManifest m;
  sim::FacilityConfig cfg;
  if (!o.preset.empty()) {
    cfg = sim::preset(o.preset);
  } else {
    cfg = io::facility_config_from(io::read_config_file(o.config));
    m.inputs.push_back(input_digest(o.config));
  }
  if (o.seed) cfg.seed = *o.seed;
  sim::validate(cfg);
  FacilityDataset ds = sim::simulate_facility(cfg);
  if (o.period > 0 && o.period != ds.timeline().period) ds = pipeline::resample(ds, o.period);

  const fs::path dir = resolve_out(o.out);
  const fs::path csv = dir / (ds.id + ".csv");
  const fs::path conf = dir / (ds.id + ".conf");
  io::write_facility_csv(ds, csv);
  io::write_file(conf, io::format_config(io::facility_settings(cfg)));
  const double grid = sim::energy_mwh(ds.aggregate, ds.timeline().period);
  const fs::path summary = dir / "summary.txt";
  io::write_file(summary, io::format_config({{"dataset", ds.id},
                                             {"samples", std::to_string(ds.size())},
                                             {"period_s", std::to_string(ds.timeline().period)},
                                             {"grid_energy_MWh", text::format_fixed(grid, 3)},
                                             {"grid_target_MWh", text::format_double(cfg.yearly_grid_demand)}}));
  m.config_digest = settings_digest(io::facility_settings(cfg));
  m.seeds = {cfg.seed};
  finish(ctx, dir, std::move(m), {csv, conf, summary});
}

// --- augment ----------------------------------------------------------------

struct AugmentOpts {
  std::string in, out, method = "amda", s_range;
  std::optional<double> s;
  std::vector<double> factors;
  std::uint64_t seed = 0;
  bool renormalize = false, lenient = false;
};

void run_augment(Context& ctx, const AugmentOpts& o) {
  const augment::Method method = augment::parse_method(o.method);
  if (method == augment::Method::AMDA && o.s.has_value() == !o.s_range.empty()) {
    throw ConfigError("AMDA needs exactly one of --s or --s-range");
  }
  const FacilityDataset ds = load_csv(o.in, o.lenient, ctx.out);
  std::vector<augment::AugmentedDataset> copies;
  if (method == augment::Method::AMDA) {
    if (o.s) {
      copies.push_back(augment::amda_augment(ds, *o.s, o.renormalize));
    } else {
      const std::vector<double> r = text::parse_double_list(o.s_range, "--s-range");
      if (r.size() != 2) throw ConfigError("--s-range needs two values 'lo,hi'");
      copies.push_back(augment::amda_augment_random(ds, r[0], r[1], o.seed, o.renormalize));
    }
  } else {
    copies = augment::rdm_augment(ds, o.factors.empty() ? augment::default_rdm_factors() : o.factors);
  }

  const fs::path dir = resolve_out(o.out);
  std::vector<fs::path> outputs;
  for (std::size_t i = 0; i < copies.size(); ++i) {
    std::string stem = ds.id + "." + augment::to_string(method);
    if (copies.size() > 1) stem += "-" + std::string(i < 9 ? "0" : "") + std::to_string(i + 1);
    outputs.push_back(dir / (stem + ".csv"));
    io::write_facility_csv(copies[i].dataset, outputs.back());
    outputs.push_back(dir / (stem + ".plan.txt"));
    io::write_file(outputs.back(), plan_text(copies[i].plan));
  }
  io::RunManifest m;
  m.inputs.push_back(input_digest(o.in));
  m.seeds = {o.seed};
  m.config_digest = settings_digest({{"method", o.method},
                                     {"s", o.s ? text::format_double(*o.s) : ""},
                                     {"s_range", o.s_range},
                                     {"factors", text::join(o.factors, ",", text::format_double)},
                                     {"renormalize", o.renormalize ? "true" : "false"}});
  finish(ctx, dir, std::move(m), outputs);
}

// --- preprocess / train ------------------------------------------------------

struct PipelineOpts {
  std::string target = "CHP";
  int period = 300;
  std::size_t window = 288, stride = 5, center = 144;
  std::string split = "0.7225,0.1275,0.15";
  std::uint64_t seed = 0;
  bool lenient = false;

  pipeline::WindowSpec spec() const {
    pipeline::WindowSpec s{window, stride, center};
    s.validate();
    return s;
  }
  std::array<double, 3> fractions() const {
    const std::vector<double> f = text::parse_double_list(split, "--split");
    if (f.size() == 2) return {f[0], f[1], 0.0};
    if (f.size() != 3) throw ConfigError("--split needs two or three fractions");
    return {f[0], f[1], f[2]};
  }
  std::vector<std::pair<std::string, std::string>> settings() const {
    return {{"target", target},
            {"period_s", std::to_string(period)},
            {"window", std::to_string(window)},
            {"stride", std::to_string(stride)},
            {"center", std::to_string(center)},
            {"split", split},
            {"seed", std::to_string(seed)}};
  }
};

void add_pipeline_options(CLI::App* sub, PipelineOpts& o) {
  sub->add_option("--target", o.target, "Target appliance (EVSE, PV, CS, CHP, BA)");
  sub->add_option("--period", o.period, "Resampling period in seconds")->check(CLI::PositiveNumber);
  sub->add_option("--window", o.window, "Window length in samples");
  sub->add_option("--stride", o.stride, "Window stride in samples");
  sub->add_option("--center", o.center, "Index of the predicted sample inside the window");
  sub->add_option("--split", o.split, "Train,val[,test] fractions");
  sub->add_option("--seed", o.seed, "Split / training seed");
  sub->add_flag("--lenient", o.lenient, "Warn instead of failing on invariant violations");
}

FacilityDataset prepared(const FacilityDataset& raw, int period) {
  return raw.timeline().period == period ? raw : pipeline::resample(raw, period);
}

struct Member {
  FacilityDataset ds;
  pipeline::SplitIndices split;
  std::vector<std::size_t> train_centers;
};

experiments::ScalerPair pooled_scalers(const std::vector<Member>& members, ApplianceKind target) {
  std::vector<double> agg, tgt;
  for (const Member& m : members) {
    for (std::size_t i : m.train_centers) {
      agg.push_back(m.ds.aggregate[i]);
      tgt.push_back(m.ds.appliance(target).values[i]);
    }
  }
  return {pipeline::fit_scaler(agg, "aggregate"), pipeline::fit_scaler(tgt, std::string(name_of(target)))};
}

std::string scaler_text(const experiments::ScalerPair& sc) {
  return io::format_config({{"aggregate.median", text::format_double(sc.aggregate.median)},
                            {"aggregate.iqr", text::format_double(sc.aggregate.iqr)},
                            {"target.median", text::format_double(sc.target.median)},
                            {"target.iqr", text::format_double(sc.target.iqr)}});
}

std::vector<Member> load_members(Context& ctx, const std::vector<std::string>& inputs, const PipelineOpts& o,
                                 io::RunManifest& m) {
  const ApplianceKind target = parse_appliance(o.target);
  const pipeline::WindowSpec spec = o.spec();
  std::vector<Member> members;
  for (const std::string& in : inputs) {
    Member mem;
    mem.ds = prepared(load_csv(in, o.lenient, ctx.out), o.period);
    if (std::all_of(mem.ds.appliance(target).values.begin(), mem.ds.appliance(target).values.end(),
                    [](double v) { return v == 0.0; })) {
      throw DataError(in + ": target appliance " + o.target + " is all zero");
    }
    mem.split = pipeline::split_indices(pipeline::window_count(mem.ds.size(), spec), o.fractions(), o.seed);
    mem.train_centers = experiments::window_centers(mem.split.train, spec);
    members.push_back(std::move(mem));
    m.inputs.push_back(input_digest(in));
  }
  return members;
}

void run_preprocess(Context& ctx, const std::string& in, const std::string& out_opt, const PipelineOpts& o) {
  io::RunManifest m;
  const std::vector<Member> members = load_members(ctx, {in}, o, m);
  const Member& mem = members.front();
  const ApplianceKind target = parse_appliance(o.target);
  const experiments::ScalerPair sc = pooled_scalers(members, target);
  const pipeline::WindowSpec spec = o.spec();

  const fs::path dir = resolve_out(out_opt);
  const fs::path resampled = dir / (mem.ds.id + ".resampled.csv");
  io::write_facility_csv(mem.ds, resampled);
  const fs::path scaler = dir / "scaler.conf";
  io::write_file(scaler, scaler_text(sc));
  std::string split = "window\tcenter_timestamp\tsplit\n";
  std::vector<std::string> label(pipeline::window_count(mem.ds.size(), spec));
  for (std::size_t i : mem.split.train) label[i] = "train";
  for (std::size_t i : mem.split.val) label[i] = "val";
  for (std::size_t i : mem.split.test) label[i] = "test";
  for (std::size_t i = 0; i < label.size(); ++i) {
    split += std::to_string(i) + "\t" +
             calendar::format_iso8601(mem.ds.timeline().at(i * spec.stride + spec.center_index)) + "\t" + label[i] +
             "\n";
  }
  const fs::path split_path = dir / "split.tsv";
  io::write_file(split_path, split);
  const fs::path windows = dir / "windows.bin";
  io::write_windows(experiments::normalized_windows(mem.ds, target, sc, spec), windows);
  const fs::path summary = dir / "summary.txt";
  io::write_file(summary, io::format_config({{"samples", std::to_string(mem.ds.size())},
                                             {"windows", std::to_string(label.size())},
                                             {"train", std::to_string(mem.split.train.size())},
                                             {"val", std::to_string(mem.split.val.size())},
                                             {"test", std::to_string(mem.split.test.size())}}));
  m.seeds = {o.seed};
  m.config_digest = settings_digest(o.settings());
  finish(ctx, dir, std::move(m), {resampled, scaler, split_path, windows, summary});
}

struct TrainOpts {
  std::vector<std::string> inputs;
  std::string out, arch = "mlp", hidden = "64,64";
  double lr = 1e-3;
  std::size_t batch = 64;
  int epochs = 100, patience = 10;
};

void run_train(Context& ctx, const TrainOpts& t, PipelineOpts o) {
  io::RunManifest m;
  const std::vector<Member> members = load_members(ctx, t.inputs, o, m);
  const ApplianceKind target = parse_appliance(o.target);
  const pipeline::WindowSpec spec = o.spec();
  const experiments::ScalerPair sc = pooled_scalers(members, target);

  std::vector<pipeline::WindowedDataset> tr, va;
  for (const Member& mem : members) {
    const pipeline::WindowedDataset all = experiments::normalized_windows(mem.ds, target, sc, spec);
    tr.push_back(pipeline::subset(all, mem.split.train));
    va.push_back(pipeline::subset(all, mem.split.val));
  }
  auto cat = [](const std::vector<pipeline::WindowedDataset>& parts) {
    std::vector<const pipeline::WindowedDataset*> p;
    for (const auto& x : parts) p.push_back(&x);
    return pipeline::concat(p);
  };
  models::ModelSpec spec_m;
  spec_m.arch = models::parse_arch(t.arch);
  spec_m.hidden_sizes.clear();
  for (std::uint64_t h : text::parse_uint_list(t.hidden, "--hidden")) spec_m.hidden_sizes.push_back(h);
  spec_m.input_len = spec.window_len;
  spec_m.center_index = spec.center_index;
  models::TrainOpts opts;
  opts.learning_rate = t.lr;
  opts.batch_size = t.batch;
  opts.max_epochs = t.epochs;
  opts.patience = t.patience;
  opts.seed = o.seed;
  models::TrainedModel model = models::train(spec_m, cat(tr), cat(va), opts);
  model.metadata["target"] = o.target;
  model.metadata["period_s"] = std::to_string(o.period);
  model.metadata["window.stride"] = std::to_string(spec.stride);
  model.metadata["scaler.aggregate.median"] = text::format_double(sc.aggregate.median);
  model.metadata["scaler.aggregate.iqr"] = text::format_double(sc.aggregate.iqr);
  model.metadata["scaler.target.median"] = text::format_double(sc.target.median);
  model.metadata["scaler.target.iqr"] = text::format_double(sc.target.iqr);

  const fs::path dir = resolve_out(t.out);
  fs::create_directories(dir);
  const fs::path ckpt = dir / "model.ckpt";
  {
    std::ofstream f(ckpt, std::ios::binary);
    if (!f) throw DataError("cannot write " + ckpt.string());
    models::write_checkpoint(f, model);
  }
  std::string log = "epoch\ttrain_loss\tval_loss\n";
  for (const models::EpochLog& e : model.log) {
    log += std::to_string(e.epoch) + "\t" + text::format_double(e.train_loss) + "\t" +
           text::format_double(e.val_loss) + "\n";
  }
  const fs::path log_path = dir / "training_log.tsv";
  io::write_file(log_path, log);
  auto settings = o.settings();
  settings.insert(settings.end(), {{"arch", t.arch},
                                   {"hidden", t.hidden},
                                   {"lr", text::format_double(t.lr)},
                                   {"batch", std::to_string(t.batch)},
                                   {"epochs", std::to_string(t.epochs)},
                                   {"patience", std::to_string(t.patience)}});
  m.seeds = {o.seed};
  m.config_digest = settings_digest(settings);
  ctx.out << "best epoch " << model.best_epoch << ", validation MSE " << text::format_double(model.best_val_loss())
          << "\n";
  finish(ctx, dir, std::move(m), {ckpt, log_path});
}

// --- predict / evaluate ------------------------------------------------------

double meta_double(const models::TrainedModel& m, const std::string& key) {
  const auto it = m.metadata.find(key);
  if (it == m.metadata.end()) throw DataError("checkpoint lacks '" + key + "'");
  return text::parse_double(it->second, key);
}

void run_predict(Context& ctx, const std::string& model_path, const std::string& in, const std::string& out_opt,
                 bool lenient) {
  std::ifstream f(model_path, std::ios::binary);
  if (!f) throw DataError("cannot open " + model_path);
  const models::TrainedModel model = models::read_checkpoint(f);
  const ApplianceKind target = parse_appliance(model.metadata.count("target") ? model.metadata.at("target") : "");
  const int period = static_cast<int>(meta_double(model, "period_s"));
  experiments::ScalerPair sc;
  sc.aggregate.median = meta_double(model, "scaler.aggregate.median");
  sc.aggregate.iqr = meta_double(model, "scaler.aggregate.iqr");
  sc.target.median = meta_double(model, "scaler.target.median");
  sc.target.iqr = meta_double(model, "scaler.target.iqr");
  const pipeline::WindowSpec spec{model.spec.input_len, static_cast<std::size_t>(meta_double(model, "window.stride")),
                                  model.spec.center_index};

  const FacilityDataset ds = prepared(load_csv(in, lenient, ctx.out), period);
  const pipeline::WindowedDataset w = experiments::normalized_windows(ds, target, sc, spec);
  const std::vector<float> z = models::predict(model, w);
  std::string tsv = "timestamp\ty_true_W\ty_pred_W\n";
  for (std::size_t i = 0; i < w.size(); ++i) {
    tsv += calendar::format_iso8601(w.timestamps[i]) + "\t" +
           text::format_double(ds.appliance(target).values[w.centers[i]]) + "\t" +
           text::format_double(sc.target.inverse(static_cast<double>(z[i]))) + "\n";
  }
  const fs::path dir = resolve_out(out_opt);
  const fs::path pred = dir / "predictions.tsv";
  io::write_file(pred, tsv);
  io::RunManifest m;
  m.inputs = {input_digest(model_path), input_digest(in)};
  m.config_digest = io::sha256_hex("");
  finish(ctx, dir, std::move(m), {pred});
}

void run_evaluate(Context& ctx, const std::string& predictions, const std::string& out_opt, double unit) {
  const std::string bytes = io::read_file(predictions);
  std::vector<double> y, yhat;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t nl = bytes.find('\n', pos);
    const std::string line = bytes.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? bytes.size() : nl + 1;
    if (line_no++ == 0 || text::trim(line).empty()) continue;
    const std::vector<std::string> f = text::split(line, '\t');
    if (f.size() != 3) throw DataError(predictions + ": line " + std::to_string(line_no) + " needs 3 fields");
    try {
      y.push_back(text::parse_double(f[1], "y_true_W"));
      yhat.push_back(text::parse_double(f[2], "y_pred_W"));
    } catch (const ConfigError& e) {
      throw DataError(predictions + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  const metrics::MetricsReport r = metrics::regression_metrics(y, yhat, unit);
  const std::string body = io::format_config({{"n", std::to_string(r.n)},
                                              {"unit_W", text::format_double(unit)},
                                              {"mae", text::format_double(r.mae)},
                                              {"mse", text::format_double(r.mse)},
                                              {"r2", text::format_double(r.r2)},
                                              {"nde", text::format_double(r.nde)}});
  ctx.out << body;
  const fs::path dir = resolve_out(out_opt);
  const fs::path path = dir / "metrics.txt";
  io::write_file(path, body);
  io::RunManifest m;
  m.inputs = {input_digest(predictions)};
  m.config_digest = settings_digest({{"unit_W", text::format_double(unit)}});
  finish(ctx, dir, std::move(m), {path});
}

// --- experiment / alignment --------------------------------------------------

struct ExperimentOpts {
  std::string scenario, config, out, seeds;
  std::vector<std::string> set;
};

void run_experiment(Context& ctx, const ExperimentOpts& o) {
  experiments::ScenarioConfig cfg;
  cfg.scenario = experiments::parse_scenario(o.scenario);
  io::RunManifest m;
  if (!o.config.empty()) {
    for (const io::ConfigEntry& e : io::read_config_file(o.config)) {
      try {
        cfg.set(e.key, e.value);
      } catch (const ConfigError& err) {
        throw ConfigError(o.config + ":" + std::to_string(e.line) + ": " + err.what());
      }
    }
    m.inputs.push_back(input_digest(o.config));
    if (experiments::parse_scenario(o.scenario) != cfg.scenario) {
      throw ConfigError("config file scenario differs from the command line");
    }
  }
  for (const std::string& kv : o.set) {
    const std::vector<io::ConfigEntry> e = io::parse_config(kv, "--set");
    if (e.size() != 1) throw ConfigError("--set expects one 'key=value'");
    cfg.set(e[0].key, e[0].value);
  }
  if (!o.seeds.empty()) cfg.set("seeds", o.seeds);
  cfg.validate();
  const experiments::ScenarioReport report = experiments::run(cfg);
  const fs::path dir = resolve_out(o.out);
  const experiments::WrittenReport written = experiments::write_report(report, dir);
  for (const std::string& line : text::split(io::read_file(dir / "report.txt"), '\n')) ctx.out << line << "\n";
  m.seeds = cfg.seeds;
  m.config_digest = settings_digest(cfg.settings());
  std::vector<fs::path> outputs = written.files;
  finish(ctx, dir, std::move(m), outputs);
}

struct AlignmentOpts {
  std::vector<std::string> train;
  std::string test, target = "CHP", out;
  std::size_t bins = metrics::kDefaultBins;
  double eps = metrics::kDefaultSmoothing;
  bool lenient = false;
};

void run_alignment(Context& ctx, const AlignmentOpts& o) {
  const ApplianceKind target = parse_appliance(o.target);
  io::RunManifest m;
  std::vector<double> train_values;
  for (const std::string& p : o.train) {
    const FacilityDataset ds = load_csv(p, o.lenient, ctx.out);
    const auto& v = ds.appliance(target).values;
    train_values.insert(train_values.end(), v.begin(), v.end());
    m.inputs.push_back(input_digest(p));
  }
  const FacilityDataset test = load_csv(o.test, o.lenient, ctx.out);
  m.inputs.push_back(input_digest(o.test));
  const metrics::DivergenceReport r =
      metrics::histogram_divergence(train_values, test.appliance(target).values, o.bins, o.eps);
  const std::string body = io::format_config({{"target", o.target},
                                              {"kl", text::format_double(r.kl)},
                                              {"kl_reverse", text::format_double(r.kl_reverse)},
                                              {"js", text::format_double(r.js)},
                                              {"bins", std::to_string(r.bins)},
                                              {"smoothing_eps", text::format_double(r.smoothing_eps)}});
  ctx.out << body;
  const fs::path dir = resolve_out(o.out);
  const fs::path path = dir / "divergence.txt";
  io::write_file(path, body);
  m.config_digest = settings_digest({{"target", o.target},
                                     {"bins", std::to_string(o.bins)},
                                     {"eps", text::format_double(o.eps)}});
  finish(ctx, dir, std::move(m), {path});
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Facility load simulation, appliance-modulated augmentation and disaggregation experiments", "amda"};
  app.require_subcommand(1);
  const std::string out_help = std::string("Output directory (default: $") + kOutDirEnv + " or ./amda_out)";

  SimulateOpts sim_o;
  CLI::App* sim = app.add_subcommand("simulate", "Simulate one facility-year and write it as CSV");
  sim->add_option("--preset", sim_o.preset, "Built-in preset, e.g. office-offenbach");
  sim->add_option("--config", sim_o.config, "Facility configuration file")->check(CLI::ExistingFile);
  sim->add_option("--seed", sim_o.seed, "Simulation seed");
  sim->add_option("--period", sim_o.period, "Resample to this period in seconds");
  sim->add_option("--out", sim_o.out, out_help);
  sim->add_flag("--list-presets", sim_o.list, "Print preset names and exit");

  AugmentOpts aug_o;
  CLI::App* aug = app.add_subcommand("augment", "Write augmented copies of a facility CSV");
  aug->add_option("--in", aug_o.in, "Facility CSV")->required()->check(CLI::ExistingFile);
  aug->add_option("--method", aug_o.method, "amda or rdm")->check(CLI::IsMember({"amda", "rdm"}));
  aug->add_option("--s", aug_o.s, "AMDA scaling hyper-parameter");
  aug->add_option("--s-range", aug_o.s_range, "Draw s uniformly from 'lo,hi' with --seed");
  aug->add_option("--factors", aug_o.factors, "RDM factors (default: 14 log-spaced in [0.2, 10])")->delimiter(',');
  aug->add_option("--seed", aug_o.seed, "Seed for --s-range");
  aug->add_flag("--renormalize-aggregate", aug_o.renormalize, "Keep the aggregate energy of the source");
  aug->add_flag("--lenient", aug_o.lenient, "Warn instead of failing on invariant violations");
  aug->add_option("--out", aug_o.out, out_help);

  PipelineOpts pre_o;
  std::string pre_in, pre_out;
  CLI::App* pre = app.add_subcommand("preprocess", "Resample, fit scalers and split windows");
  pre->add_option("--in", pre_in, "Facility CSV")->required()->check(CLI::ExistingFile);
  pre->add_option("--out", pre_out, out_help);
  add_pipeline_options(pre, pre_o);

  TrainOpts tr_o;
  PipelineOpts tr_p;
  tr_p.split = "0.8,0.2";
  CLI::App* tr = app.add_subcommand("train", "Train a sequence-to-point model");
  tr->add_option("--in", tr_o.inputs, "Facility CSV (repeat to pool several)")->required()->check(CLI::ExistingFile);
  tr->add_option("--arch", tr_o.arch, "linear, mlp or dilated-conv");
  tr->add_option("--hidden", tr_o.hidden, "MLP hidden sizes, comma separated");
  tr->add_option("--lr", tr_o.lr, "Adam learning rate");
  tr->add_option("--batch", tr_o.batch, "Minibatch size");
  tr->add_option("--epochs", tr_o.epochs, "Maximum epochs");
  tr->add_option("--patience", tr_o.patience, "Early-stopping patience");
  tr->add_option("--out", tr_o.out, out_help);
  add_pipeline_options(tr, tr_p);

  std::string pr_model, pr_in, pr_out;
  bool pr_lenient = false;
  CLI::App* pr = app.add_subcommand("predict", "Predict the target appliance for a facility CSV");
  pr->add_option("--model", pr_model, "Checkpoint written by train")->required()->check(CLI::ExistingFile);
  pr->add_option("--in", pr_in, "Facility CSV")->required()->check(CLI::ExistingFile);
  pr->add_option("--out", pr_out, out_help);
  pr->add_flag("--lenient", pr_lenient, "Warn instead of failing on invariant violations");

  std::string ev_pred, ev_out;
  double ev_unit = 1e6;
  CLI::App* ev = app.add_subcommand("evaluate", "Compute MAE, MSE, R2 and NDE from predictions");
  ev->add_option("--predictions", ev_pred, "predictions.tsv written by predict")->required()->check(CLI::ExistingFile);
  ev->add_option("--unit", ev_unit, "Watts per reported unit (default MW)")->check(CLI::PositiveNumber);
  ev->add_option("--out", ev_out, out_help);

  ExperimentOpts ex_o;
  CLI::App* ex = app.add_subcommand("experiment", "Run an evaluation scenario");
  ex->add_option("scenario", ex_o.scenario, "appliance-variation, facility-variation or alignment")
      ->required()
      ->check(CLI::IsMember({"appliance-variation", "facility-variation", "alignment"}));
  ex->add_option("--config", ex_o.config, "Scenario configuration file")->check(CLI::ExistingFile);
  ex->add_option("--seeds", ex_o.seeds, "Comma-separated repetition seeds");
  ex->add_option("--set", ex_o.set, "Override one setting, 'key=value' (repeatable)");
  ex->add_option("--out", ex_o.out, out_help);

  AlignmentOpts al_o;
  CLI::App* al = app.add_subcommand("alignment", "KL/JS divergence of a target appliance between CSVs");
  al->add_option("--train", al_o.train, "Training CSV (repeat to pool)")->required()->check(CLI::ExistingFile);
  al->add_option("--test", al_o.test, "Test CSV")->required()->check(CLI::ExistingFile);
  al->add_option("--target", al_o.target, "Appliance");
  al->add_option("--bins", al_o.bins, "Histogram bins")->check(CLI::PositiveNumber);
  al->add_option("--eps", al_o.eps, "Smoothing mass per bin");
  al->add_flag("--lenient", al_o.lenient, "Warn instead of failing on invariant violations");
  al->add_option("--out", al_o.out, out_help);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::usage);
  }

  Context ctx{args, out};
  try {
    if (sim->parsed()) run_simulate(ctx, sim_o);
    else if (aug->parsed()) run_augment(ctx, aug_o);
    else if (pre->parsed()) run_preprocess(ctx, pre_in, pre_out, pre_o);
    else if (tr->parsed()) run_train(ctx, tr_o, tr_p);
    else if (pr->parsed()) run_predict(ctx, pr_model, pr_in, pr_out, pr_lenient);
    else if (ev->parsed()) run_evaluate(ctx, ev_pred, ev_out, ev_unit);
    else if (ex->parsed()) run_experiment(ctx, ex_o);
    else if (al->parsed()) run_alignment(ctx, al_o);
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::data);
  }
}

}  // namespace amda::cli
