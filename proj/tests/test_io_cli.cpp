#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "amda/augment.hpp"
#include "amda/cli.hpp"
#include "amda/error.hpp"
#include "amda/io.hpp"
#include "amda/pipeline.hpp"
#include "amda/text.hpp"
#include "doctest.h"

using namespace amda;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("amda_io_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Run {
  int code;
  std::string out, err;
};

Run run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "amda");
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

sim::FacilityDataset tiny_dataset(std::size_t n) {
  sim::FacilityDataset ds;
  ds.id = "tiny";
  ds.weather.timeline = {1546300800, 300, n};
  for (std::size_t t = 0; t < n; ++t) {
    ds.weather.temperature.push_back(270.0 + 0.1 * static_cast<double>(t));
    ds.weather.diffuse_radiation.push_back(t % 3 == 0 ? 0.0 : 12.5);
    ds.weather.direct_radiation.push_back(1.0 / 3.0);
  }
  const double scale[] = {1.5, 1e4 / 7.0, 333.25, 2e5 / 3.0, 1e5};
  for (ApplianceKind k : kAllAppliances) {
    auto& col = ds.appliance(k);
    col.kind = k;
    const double sign = role_of(k) == ApplianceRole::producer ? -1.0 : 1.0;
    for (std::size_t t = 0; t < n; ++t) col.values.push_back(sign * scale[index_of(k)] * static_cast<double>(t % 11));
  }
  ds.recompute_aggregate();
  return ds;
}

std::string joined(const std::vector<std::string>& parts, std::string_view sep) {
  return text::join(parts, sep, [](const std::string& x) { return x; });
}

// Replaces one comma-separated field on data row `row` (1-based after the header).
std::string edit_field(const std::string& csv, std::size_t row, std::size_t col, const std::string& value) {
  std::vector<std::string> lines = text::split(csv, '\n');
  std::vector<std::string> fields = text::split(lines[row], ',');
  fields[col] = value;
  lines[row] = joined(fields, ",");
  return joined(lines, "\n");
}

// Deletes one column from every line.
std::string drop_column(const std::string& csv, std::size_t col) {
  std::vector<std::string> lines = text::split(csv, '\n');
  for (auto& l : lines) {
    if (l.empty()) continue;
    std::vector<std::string> f = text::split(l, ',');
    f.erase(f.begin() + static_cast<std::ptrdiff_t>(col));
    l = joined(f, ",");
  }
  return joined(lines, "\n");
}

}  // namespace

TEST_CASE("facility CSV round trip is exact") {
  const fs::path dir = scratch("roundtrip");
  const sim::FacilityDataset ds = tiny_dataset(40);
  io::write_facility_csv(ds, dir / "tiny.csv");
  const sim::FacilityDataset back = io::read_facility_csv(dir / "tiny.csv");
  CHECK(back.id == "tiny");
  CHECK(back.timeline() == ds.timeline());
  CHECK(back.weather.temperature == ds.weather.temperature);
  CHECK(back.weather.diffuse_radiation == ds.weather.diffuse_radiation);
  CHECK(back.weather.direct_radiation == ds.weather.direct_radiation);
  CHECK(back.aggregate == ds.aggregate);
  for (ApplianceKind k : kAllAppliances) CHECK(back.appliance(k).values == ds.appliance(k).values);

  const std::string header = text::split(io::read_file(dir / "tiny.csv"), '\n').front();
  CHECK(header == "timestamp,temperature_K,diffuse_Wm2,direct_Wm2,aggregate_W,evse_W,pv_W,cs_W,chp_W,ba_W");
  fs::remove_all(dir);
}

TEST_CASE("facility CSV validation errors") {
  const fs::path dir = scratch("csv_errors");
  const sim::FacilityDataset ds = tiny_dataset(20);
  io::write_facility_csv(ds, dir / "good.csv");
  const std::string good = io::read_file(dir / "good.csv");

  SUBCASE("aggregate off by 10% fails in strict mode, warns otherwise") {
    io::write_file(dir / "bad.csv", edit_field(good, 5, 4, text::format_double(ds.aggregate[4] * 1.1)));
    CHECK_THROWS_AS(io::read_facility_csv(dir / "bad.csv"), DataError);
    std::vector<std::string> warnings;
    const auto loaded = io::read_facility_csv(dir / "bad.csv", {false, 1e-6}, &warnings);
    CHECK(loaded.size() == 20);
    CHECK(warnings.size() == 1);
  }
  SUBCASE("sign discipline") {
    io::write_file(dir / "bad.csv", edit_field(good, 3, 6, "5"));  // positive PV
    CHECK_THROWS_AS(io::read_facility_csv(dir / "bad.csv"), DataError);
  }
  SUBCASE("missing column is named") {
    io::write_file(dir / "bad.csv", drop_column(good, 8));
    try {
      io::read_facility_csv(dir / "bad.csv");
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("chp_W") != std::string::npos);
    }
  }
  SUBCASE("non-uniform grid") {
    io::write_file(dir / "bad.csv", edit_field(good, 4, 0, "2019-01-01T00:16:00"));
    CHECK_THROWS_WITH_AS(io::read_facility_csv(dir / "bad.csv"), doctest::Contains("non-uniform"), DataError);
  }
  SUBCASE("malformed number") {
    io::write_file(dir / "bad.csv", edit_field(good, 2, 1, "warm"));
    CHECK_THROWS_AS(io::read_facility_csv(dir / "bad.csv"), DataError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(io::read_facility_csv(dir / "none.csv"), DataError); }
  fs::remove_all(dir);
}

TEST_CASE("invariant checker reports violations") {
  sim::FacilityDataset ds = tiny_dataset(10);
  CHECK(io::check_invariants(ds).empty());
  ds.aggregate[3] += 1e4;
  ds.appliance(ApplianceKind::CHP).values[5] = 1.0;
  ds.aggregate[5] = 0;
  for (ApplianceKind k : kAllAppliances) ds.aggregate[5] += ds.appliance(k).values[5];
  CHECK(io::check_invariants(ds).size() == 2);
}

TEST_CASE("config grammar") {
  const auto e = io::parse_config("# comment\n\n a = 1 \nb.c-d_e = two words # trailing\n", "t");
  REQUIRE(e.size() == 2);
  CHECK(e[0].key == "a");
  CHECK(e[0].value == "1");
  CHECK(e[0].line == 3);
  CHECK(e[1].key == "b.c-d_e");
  CHECK(e[1].value == "two words");
  CHECK_THROWS_WITH_AS(io::parse_config("a = 1\na = 2\n", "t"), doctest::Contains("t:2:"), ConfigError);
  CHECK_THROWS_AS(io::parse_config("just a line\n", "t"), ConfigError);
  CHECK_THROWS_AS(io::parse_config("bad key! = 1\n", "t"), ConfigError);

  const std::vector<std::pair<std::string, std::string>> s{{"x", "1"}, {"y.z", "a,b"}};
  const auto parsed = io::parse_config(io::format_config(s));
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[1].key == "y.z");
  CHECK(parsed[1].value == "a,b");
}

TEST_CASE("preset files equal the built-in presets") {
  for (const std::string& name : sim::preset_names()) {
    CAPTURE(name);
    const fs::path file = fs::path(AMDA_SOURCE_DIR) / "presets" / (name + ".conf");
    REQUIRE(fs::exists(file));
    const sim::FacilityConfig from_file = io::facility_config_from(io::read_config_file(file));
    CHECK(io::facility_settings(from_file) == io::facility_settings(sim::preset(name)));
  }
}

TEST_CASE("facility config: preset key with overrides") {
  const auto entries = io::parse_config("preset = dealer-tokyo\nyearly_grid_demand_MWh = 170\nseed = 9\n");
  const sim::FacilityConfig c = io::facility_config_from(entries);
  CHECK(c.id() == "dealer-tokyo");
  CHECK(c.yearly_grid_demand == 170);
  CHECK(c.seed == 9);
  CHECK_THROWS_AS(io::facility_config_from(io::parse_config("preset = dealer-tokyo\nwidth = 3\n")), ConfigError);
  CHECK_THROWS_AS(io::facility_config_from(io::parse_config("preset = dealer-tokyo\npv_area_m2 = -3\n")),
                  ConfigError);
}

TEST_CASE("sha256 digests") {
  CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("manifest write, read and verify") {
  const fs::path dir = scratch("manifest");
  io::write_file(dir / "a.txt", "alpha");
  io::write_file(dir / "b.txt", "beta");
  io::RunManifest m;
  m.tool_version = io::kToolVersion;
  m.command_line = {"amda", "x"};
  m.config_digest = io::sha256_hex("cfg");
  m.seeds = {3, 4};
  const fs::path path = io::write_manifest(m, dir, {dir / "a.txt", dir / "b.txt"});
  const io::RunManifest back = io::read_manifest(path);
  CHECK(back.seeds == m.seeds);
  REQUIRE(back.outputs.size() == 2);
  CHECK(back.outputs[0].path == "a.txt");
  CHECK(back.outputs[0].sha256 == io::sha256_hex("alpha"));
  CHECK(io::verify_manifest(path).empty());
  io::write_file(dir / "b.txt", "gamma");
  CHECK(io::verify_manifest(path) == std::vector<std::string>{"b.txt"});
  fs::remove_all(dir);
}

TEST_CASE("cli: simulate writes CSV and manifest, reproducibly") {
  const fs::path dir = scratch("simulate");
  const Run r = run_cli({"simulate", "--preset", "dealer-offenbach", "--seed", "7", "--period", "300", "--out",
                      dir.string()});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "dealer-offenbach.csv"));
  CHECK(fs::exists(dir / "timing.txt"));
  const fs::path manifest = dir / io::kManifestName;
  REQUIRE(fs::exists(manifest));
  CHECK(io::verify_manifest(manifest).empty());
  const io::RunManifest m = io::read_manifest(manifest);
  CHECK(m.seeds == std::vector<std::uint64_t>{7});
  CHECK(m.tool_version == io::kToolVersion);

  const sim::FacilityDataset ds = io::read_facility_csv(dir / "dealer-offenbach.csv");
  CHECK(ds.size() == 105120);
  CHECK(ds.timeline().period == 300);

  const std::string csv = io::read_file(dir / "dealer-offenbach.csv");
  const std::string man = io::read_file(manifest);
  REQUIRE(run_cli({"simulate", "--preset", "dealer-offenbach", "--seed", "7", "--period", "300", "--out",
                dir.string()})
              .code == 0);
  CHECK(io::read_file(dir / "dealer-offenbach.csv") == csv);
  CHECK(io::read_file(manifest) == man);
  fs::remove_all(dir);
}

TEST_CASE("cli: augment, preprocess, train, predict, evaluate, alignment") {
  const fs::path dir = scratch("chain");
  REQUIRE(run_cli({"simulate", "--preset", "office-offenbach", "--period", "300", "--out", (dir / "sim").string()}).code ==
          0);
  const fs::path csv = dir / "sim" / "office-offenbach.csv";

  SUBCASE("augment amda scales BA elementwise") {
    const Run r = run_cli({"augment", "--in", csv.string(), "--method", "amda", "--s", "1.73", "--out",
                        (dir / "aug").string()});
    REQUIRE(r.code == 0);
    const sim::FacilityDataset src = io::read_facility_csv(csv);
    const sim::FacilityDataset aug = io::read_facility_csv(dir / "aug" / "office-offenbach.amda.csv");
    const double sba = 1.73 * (1.0 - augment::relative_contributions(src)[ApplianceKind::BA]);
    CHECK(sba == doctest::Approx(0.598).epsilon(0.1));
    const auto& x = src.appliance(ApplianceKind::BA).values;
    const auto& y = aug.appliance(ApplianceKind::BA).values;
    bool ok = true;
    for (std::size_t t = 0; t < x.size(); ++t) ok = ok && std::abs(y[t] - sba * x[t]) <= 1e-9 * std::abs(x[t]);
    CHECK(ok);
    CHECK(fs::exists(dir / "aug" / "office-offenbach.amda.plan.txt"));
    CHECK(io::verify_manifest(dir / "aug" / io::kManifestName).empty());
  }
  SUBCASE("augment rdm writes fourteen copies") {
    REQUIRE(run_cli({"augment", "--in", csv.string(), "--method", "rdm", "--out", (dir / "rdm").string()}).code == 0);
    CHECK(fs::exists(dir / "rdm" / "office-offenbach.rdm-01.csv"));
    CHECK(fs::exists(dir / "rdm" / "office-offenbach.rdm-14.csv"));
    CHECK_FALSE(fs::exists(dir / "rdm" / "office-offenbach.rdm-15.csv"));
  }
  SUBCASE("preprocess writes windows and split") {
    REQUIRE(run_cli({"preprocess", "--in", csv.string(), "--out", (dir / "pre").string()}).code == 0);
    const pipeline::WindowedDataset w = io::read_windows(dir / "pre" / "windows.bin");
    CHECK(w.size() == 20967);
    CHECK(w.spec == pipeline::WindowSpec{});
    CHECK(fs::exists(dir / "pre" / "split.tsv"));
    CHECK(fs::exists(dir / "pre" / "scaler.conf"));
  }
  SUBCASE("train, predict and evaluate") {
    REQUIRE(run_cli({"train", "--in", csv.string(), "--arch", "linear", "--epochs", "3", "--patience", "2", "--seed",
                  "1", "--out", (dir / "model").string()})
                .code == 0);
    REQUIRE(fs::exists(dir / "model" / "model.ckpt"));
    REQUIRE(run_cli({"predict", "--model", (dir / "model" / "model.ckpt").string(), "--in", csv.string(), "--out",
                  (dir / "pred").string()})
                .code == 0);
    REQUIRE(run_cli({"evaluate", "--predictions", (dir / "pred" / "predictions.tsv").string(), "--out",
                  (dir / "eval").string()})
                .code == 0);
    const auto metrics = io::parse_config(io::read_file(dir / "eval" / "metrics.txt"));
    bool has_nde = false;
    for (const auto& e : metrics) {
      if (e.key == "nde") {
        has_nde = true;
        CHECK(std::stod(e.value) >= 0.0);
      }
    }
    CHECK(has_nde);
  }
  SUBCASE("alignment of a dataset with itself is zero") {
    REQUIRE(run_cli({"alignment", "--train", csv.string(), "--test", csv.string(), "--out", (dir / "al").string()})
                .code == 0);
    const auto d = io::parse_config(io::read_file(dir / "al" / "divergence.txt"));
    for (const auto& e : d) {
      if (e.key == "kl" || e.key == "js") CHECK(std::stod(e.value) == doctest::Approx(0.0));
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("cli: exit codes") {
  const fs::path dir = scratch("exit");
  CHECK(run_cli({"frobnicate"}).code == 2);
  CHECK(run_cli({}).code == 2);

  const Run bad_flag = run_cli({"simulate", "--preset", "office-offenbach", "--bogus", "--out", (dir / "x").string()});
  CHECK(bad_flag.code == 2);
  CHECK_FALSE(fs::exists(dir / "x"));

  CHECK(run_cli({"simulate", "--preset", "office-paris", "--out", (dir / "y").string()}).code == 3);
  CHECK(run_cli({"simulate", "--out", (dir / "y").string()}).code == 3);

  io::write_file(dir / "broken.csv", "timestamp,nothing\n");
  CHECK(run_cli({"augment", "--in", (dir / "broken.csv").string(), "--s", "1", "--out", (dir / "z").string()}).code ==
        4);

  io::write_file(dir / "infeasible.conf", "preset = dealer-offenbach\nyearly_grid_demand_MWh = 50000\n");
  CHECK(run_cli({"simulate", "--config", (dir / "infeasible.conf").string(), "--out", (dir / "w").string()}).code == 5);

  const Run list = run_cli({"simulate", "--list-presets"});
  CHECK(list.code == 0);
  CHECK(list.out.find("logistics-tokyo") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("cli: default output directory from the environment") {
  const fs::path dir = scratch("env");
  ::setenv(cli::kOutDirEnv, dir.string().c_str(), 1);
  const Run r = run_cli({"simulate", "--preset", "dealer-tokyo", "--period", "3600"});
  ::unsetenv(cli::kOutDirEnv);
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "dealer-tokyo.csv"));
  CHECK(fs::exists(dir / io::kManifestName));
  fs::remove_all(dir);
}
