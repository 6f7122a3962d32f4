#include "amda/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <cctype>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <sstream>

#include "amda/calendar.hpp"
#include "amda/error.hpp"
#include "amda/text.hpp"

namespace amda::io {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

void write_facility_csv(const sim::FacilityDataset& ds, const fs::path& path) {
  const std::size_t n = ds.size();
  if (ds.weather.size() != n) throw DataError("weather and aggregate traces differ in length");
  for (const sim::ApplianceTrace& a : ds.appliances) {
    if (a.values.size() != n) throw DataError("appliance traces differ in length");
  }
  std::string out;
  out.reserve(n * 120);
  for (std::size_t c = 0; c < kCsvColumns.size(); ++c) {
    if (c) out += ',';
    out += kCsvColumns[c];
  }
  out += '\n';
  for (std::size_t t = 0; t < n; ++t) {
    out += calendar::format_iso8601(ds.timeline().at(t));
    for (double v : {ds.weather.temperature[t], ds.weather.diffuse_radiation[t], ds.weather.direct_radiation[t],
                     ds.aggregate[t]}) {
      out += ',';
      out += text::format_double(v);
    }
    for (const sim::ApplianceTrace& a : ds.appliances) {
      out += ',';
      out += text::format_double(a.values[t]);
    }
    out += '\n';
  }
  write_file(path, out);
}

std::vector<std::string> check_invariants(const sim::FacilityDataset& ds, double aggregate_tolerance,
                                          std::size_t limit) {
  std::vector<std::string> issues;
  auto report = [&](std::string msg) {
    if (issues.size() < limit) issues.push_back(std::move(msg));
  };
  for (const sim::ApplianceTrace& a : ds.appliances) {
    const bool producer = a.role() == ApplianceRole::producer;
    for (std::size_t t = 0; t < a.values.size(); ++t) {
      const double v = a.values[t];
      if (producer ? v > 0.0 : v < 0.0) {
        report(std::string(name_of(a.kind)) + " at sample " + std::to_string(t) + " has the wrong sign (" +
               text::format_double(v) + " W)");
        break;
      }
    }
  }
  for (std::size_t t = 0; t < ds.weather.size(); ++t) {
    if (ds.weather.diffuse_radiation[t] < 0.0 || ds.weather.direct_radiation[t] < 0.0) {
      report("negative radiation at sample " + std::to_string(t));
      break;
    }
  }
  for (std::size_t t = 0; t < ds.size(); ++t) {
    double sum = 0.0, scale = 0.0;
    for (const sim::ApplianceTrace& a : ds.appliances) {
      sum += a.values[t];
      scale += std::abs(a.values[t]);
    }
    if (std::abs(ds.aggregate[t] - sum) > aggregate_tolerance * std::max(scale, 1.0)) {
      report("aggregate differs from the appliance sum at sample " + std::to_string(t) + " (" +
             text::format_double(ds.aggregate[t]) + " vs " + text::format_double(sum) + " W)");
      break;
    }
  }
  return issues;
}

sim::FacilityDataset read_facility_csv(const fs::path& path, const CsvReadOptions& opts,
                                       std::vector<std::string>* warnings) {
  const std::string bytes = read_file(path);
  const std::string where = path.string();
  std::string_view rest(bytes);
  auto next_line = [&]() -> std::string_view {
    const std::size_t nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
  };

  const std::vector<std::string> header = text::split(next_line(), ',');
  for (std::string_view col : kCsvColumns) {
    if (std::find(header.begin(), header.end(), col) == header.end()) {
      throw DataError(where + ": missing column '" + std::string(col) + "'");
    }
  }
  if (header.size() != kCsvColumns.size()) {
    throw DataError(where + ": expected " + std::to_string(kCsvColumns.size()) + " columns, found " +
                    std::to_string(header.size()));
  }
  for (std::size_t c = 0; c < kCsvColumns.size(); ++c) {
    if (header[c] != kCsvColumns[c]) {
      throw DataError(where + ": column " + std::to_string(c + 1) + " is '" + header[c] + "', expected '" +
                      std::string(kCsvColumns[c]) + "'");
    }
  }

  sim::FacilityDataset ds;
  ds.id = path.stem().string();
  for (ApplianceKind k : kAllAppliances) ds.appliance(k).kind = k;
  std::vector<std::int64_t> stamps;
  std::array<std::vector<double>*, 9> columns{&ds.weather.temperature, &ds.weather.diffuse_radiation,
                                              &ds.weather.direct_radiation, &ds.aggregate};
  for (std::size_t i = 0; i < kApplianceCount; ++i) columns[4 + i] = &ds.appliances[i].values;

  std::size_t row = 1;
  while (!rest.empty()) {
    const std::string_view line = next_line();
    ++row;
    if (line.empty()) continue;
    std::size_t start = 0;
    for (std::size_t c = 0; c < kCsvColumns.size(); ++c) {
      const std::size_t comma = line.find(',', start);
      const bool last = c + 1 == kCsvColumns.size();
      if ((comma == std::string_view::npos) != last) {
        throw DataError(where + ": row " + std::to_string(row) + " does not have " +
                        std::to_string(kCsvColumns.size()) + " fields");
      }
      const std::string_view field = line.substr(start, last ? std::string_view::npos : comma - start);
      try {
        if (c == 0) stamps.push_back(calendar::parse_iso8601(text::trim(field)));
        else columns[c - 1]->push_back(text::parse_double(field, kCsvColumns[c]));
      } catch (const Error& e) {
        throw DataError(where + ": row " + std::to_string(row) + ": " + e.what());
      }
      start = comma + 1;
    }
  }
  if (stamps.size() < 2) throw DataError(where + ": need at least two data rows");
  const std::int64_t period = stamps[1] - stamps[0];
  if (period <= 0) throw DataError(where + ": timestamps must increase");
  for (std::size_t i = 2; i < stamps.size(); ++i) {
    if (stamps[i] - stamps[i - 1] != period) {
      throw DataError(where + ": non-uniform time grid at row " + std::to_string(i + 2));
    }
  }
  ds.weather.timeline = {stamps.front(), static_cast<int>(period), stamps.size()};

  const std::vector<std::string> issues = check_invariants(ds, opts.aggregate_tolerance);
  if (!issues.empty()) {
    if (opts.strict) throw DataError(where + ": " + issues.front());
    if (warnings) {
      for (const std::string& i : issues) warnings->push_back(where + ": " + i);
    }
  }
  return ds;
}

std::vector<ConfigEntry> parse_config(std::string_view text, std::string_view source) {
  std::vector<ConfigEntry> out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const std::string at = std::string(source) + ":" + std::to_string(line_no);
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(at + ": expected 'key = value'");
    const std::string key(text::trim(line.substr(0, eq)));
    const std::string value(text::trim(line.substr(eq + 1)));
    const bool key_ok = !key.empty() && std::all_of(key.begin(), key.end(), [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
    });
    if (!key_ok) throw ConfigError(at + ": invalid key '" + key + "'");
    for (const ConfigEntry& e : out) {
      if (e.key == key) throw ConfigError(at + ": duplicate key '" + key + "' (first on line " +
                                          std::to_string(e.line) + ")");
    }
    out.push_back({key, value, line_no});
  }
  return out;
}

std::vector<ConfigEntry> read_config_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string format_config(const std::vector<std::pair<std::string, std::string>>& settings) {
  std::string out;
  for (const auto& [k, v] : settings) out += k + " = " + v + "\n";
  return out;
}

std::vector<std::pair<std::string, std::string>> facility_settings(const sim::FacilityConfig& c) {
  auto d = [](double v) { return text::format_double(v); };
  auto i = [](auto v) { return std::to_string(v); };
  const sim::LocationParams& l = c.location;
  return {
      {"facility_type", std::string(sim::name_of(c.facility_type))},
      {"location", std::string(sim::name_of(l.name))},
      {"location.latitude_deg", d(l.latitude_deg)},
      {"location.mean_temp_K", d(l.mean_temp)},
      {"location.seasonal_amp_K", d(l.seasonal_amp)},
      {"location.diurnal_amp_K", d(l.diurnal_amp)},
      {"location.seasonal_phase_day", i(l.seasonal_phase)},
      {"location.cloudiness", d(l.cloudiness)},
      {"location.weather_noise_K", d(l.weather_noise)},
      {"location.workweek", i(l.workweek)},
      {"location.work_start_hour", d(l.work_start_hour)},
      {"location.work_end_hour", d(l.work_end_hour)},
      {"location.holidays", text::join(l.holidays, ",", [](int day) { return calendar::format_month_day(day); })},
      {"yearly_grid_demand_MWh", d(c.yearly_grid_demand)},
      {"evse_yearly_energy_MWh", d(c.evse_yearly_energy)},
      {"pv_power_per_m2_W", d(c.pv_power_per_m2)},
      {"pv_area_m2", d(c.pv_area)},
      {"cs_nominal_power_kW", d(c.cs_nominal_power)},
      {"cs_usage_hours", d(c.cs_usage_hours)},
      {"chp_nominal_power_kW", d(c.chp_nominal_power)},
      {"chp_efficiency", d(c.chp_efficiency)},
      {"ba_yearly_demand_MWh", d(c.ba_yearly_demand)},
      {"ba_server_power_kW", d(c.ba_server_power)},
      {"server_cooling", c.server_cooling ? "true" : "false"},
      {"sample_period_s", i(c.sample_period)},
      {"year_length", i(c.year_length)},
      {"seed", i(c.seed)},
      {"evse_charger_power_kW", d(c.evse_charger_power)},
      {"evse_chargers", i(c.evse_chargers)},
      {"evse_sessions_per_day", d(c.evse_sessions_per_day)},
      {"cs_setpoint_K", d(c.cs_setpoint)},
      {"cs_solar_gain", d(c.cs_solar_gain)},
      {"chp_heating_base_K", d(c.chp_heating_base)},
      {"chp_hot_water_heat", d(c.chp_hot_water_heat)},
      {"chp_process_heat", d(c.chp_process_heat)},
      {"chp_floor_fraction", d(c.chp_floor_fraction)},
  };
}

void set_facility_field(sim::FacilityConfig& c, const std::string& key, const std::string& v) {
  auto d = [&] { return text::parse_double(v, key); };
  auto i = [&] { return static_cast<int>(text::parse_int(v, key)); };
  sim::LocationParams& l = c.location;
  if (key == "facility_type") c.facility_type = sim::parse_facility_type(v);
  else if (key == "location") l.name = sim::parse_location(v);
  else if (key == "location.latitude_deg") l.latitude_deg = d();
  else if (key == "location.mean_temp_K") l.mean_temp = d();
  else if (key == "location.seasonal_amp_K") l.seasonal_amp = d();
  else if (key == "location.diurnal_amp_K") l.diurnal_amp = d();
  else if (key == "location.seasonal_phase_day") l.seasonal_phase = i();
  else if (key == "location.cloudiness") l.cloudiness = d();
  else if (key == "location.weather_noise_K") l.weather_noise = d();
  else if (key == "location.workweek") l.workweek = i();
  else if (key == "location.work_start_hour") l.work_start_hour = d();
  else if (key == "location.work_end_hour") l.work_end_hour = d();
  else if (key == "location.holidays") {
    l.holidays.clear();
    for (const std::string& md : text::split(v, ',')) l.holidays.push_back(calendar::parse_month_day(md));
  }
  else if (key == "yearly_grid_demand_MWh") c.yearly_grid_demand = d();
  else if (key == "evse_yearly_energy_MWh") c.evse_yearly_energy = d();
  else if (key == "pv_power_per_m2_W") c.pv_power_per_m2 = d();
  else if (key == "pv_area_m2") c.pv_area = d();
  else if (key == "cs_nominal_power_kW") c.cs_nominal_power = d();
  else if (key == "cs_usage_hours") c.cs_usage_hours = d();
  else if (key == "chp_nominal_power_kW") c.chp_nominal_power = d();
  else if (key == "chp_efficiency") c.chp_efficiency = d();
  else if (key == "ba_yearly_demand_MWh") c.ba_yearly_demand = d();
  else if (key == "ba_server_power_kW") c.ba_server_power = d();
  else if (key == "server_cooling") c.server_cooling = text::parse_bool(v, key);
  else if (key == "sample_period_s") c.sample_period = i();
  else if (key == "year_length") c.year_length = i();
  else if (key == "seed") c.seed = text::parse_uint(v, key);
  else if (key == "evse_charger_power_kW") c.evse_charger_power = d();
  else if (key == "evse_chargers") c.evse_chargers = i();
  else if (key == "evse_sessions_per_day") c.evse_sessions_per_day = d();
  else if (key == "cs_setpoint_K") c.cs_setpoint = d();
  else if (key == "cs_solar_gain") c.cs_solar_gain = d();
  else if (key == "chp_heating_base_K") c.chp_heating_base = d();
  else if (key == "chp_hot_water_heat") c.chp_hot_water_heat = d();
  else if (key == "chp_process_heat") c.chp_process_heat = d();
  else if (key == "chp_floor_fraction") c.chp_floor_fraction = d();
  else throw ConfigError("unknown facility setting '" + key + "'");
}

sim::FacilityConfig facility_config_from(const std::vector<ConfigEntry>& entries) {
  sim::FacilityConfig c;
  for (const ConfigEntry& e : entries) {
    if (e.key == "preset") c = sim::preset(e.value);
  }
  for (const ConfigEntry& e : entries) {
    if (e.key == "preset") continue;
    try {
      set_facility_field(c, e.key, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError("line " + std::to_string(e.line) + ": " + err.what());
    }
  }
  sim::validate(c);
  return c;
}

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) {
    throw DataError("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[md[i] >> 4];
    hex += kHex[md[i] & 15];
  }
  return hex;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

namespace {

nlohmann::ordered_json digests_to_json(const std::vector<FileDigest>& files) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const FileDigest& f : files) arr.push_back({{"path", f.path}, {"sha256", f.sha256}});
  return arr;
}

std::vector<FileDigest> digests_from_json(const nlohmann::json& arr) {
  std::vector<FileDigest> out;
  for (const auto& f : arr) out.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>()});
  return out;
}

}  // namespace

fs::path write_manifest(RunManifest m, const fs::path& dir, const std::vector<fs::path>& outputs) {
  m.outputs.clear();
  for (const fs::path& p : outputs) {
    const fs::path rel = p.lexically_normal().lexically_relative(dir.lexically_normal());
    m.outputs.push_back({(rel.empty() ? p : rel).generic_string(), sha256_file(p)});
  }
  nlohmann::ordered_json j;
  j["tool_version"] = m.tool_version;
  j["command_line"] = m.command_line;
  j["config_digest"] = m.config_digest;
  j["seeds"] = m.seeds;
  j["inputs"] = digests_to_json(m.inputs);
  j["outputs"] = digests_to_json(m.outputs);
  j["timing_file"] = m.timing_file;
  const fs::path path = dir / kManifestName;
  write_file(path, j.dump(2) + "\n");
  return path;
}

RunManifest read_manifest(const fs::path& path) {
  try {
    const nlohmann::json j = nlohmann::json::parse(read_file(path));
    RunManifest m;
    m.tool_version = j.at("tool_version").get<std::string>();
    m.command_line = j.at("command_line").get<std::vector<std::string>>();
    m.config_digest = j.at("config_digest").get<std::string>();
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    m.inputs = digests_from_json(j.at("inputs"));
    m.outputs = digests_from_json(j.at("outputs"));
    m.timing_file = j.at("timing_file").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed manifest: " + e.what());
  }
}

std::vector<std::string> verify_manifest(const fs::path& path) {
  const RunManifest m = read_manifest(path);
  std::vector<std::string> bad;
  auto check = [&](const fs::path& p, const std::string& digest, const std::string& label) {
    if (!fs::exists(p) || sha256_file(p) != digest) bad.push_back(label);
  };
  for (const FileDigest& f : m.inputs) check(f.path, f.sha256, f.path);
  for (const FileDigest& f : m.outputs) check(path.parent_path() / f.path, f.sha256, f.path);
  return bad;
}

static_assert(std::endian::native == std::endian::little, "window files are written in host byte order");

void write_windows(const pipeline::WindowedDataset& ds, const fs::path& path) {
  const std::size_t n = ds.size();
  if (ds.inputs.size() != n * ds.spec.window_len) throw DataError("windowed dataset has ragged inputs");
  std::string bytes(kWindowMagic);
  auto put = [&](const void* p, std::size_t len) { bytes.append(static_cast<const char*>(p), len); };
  for (std::uint64_t v : {std::uint64_t{n}, std::uint64_t{ds.spec.window_len}, std::uint64_t{ds.spec.stride},
                          std::uint64_t{ds.spec.center_index}}) {
    put(&v, sizeof v);
  }
  put(ds.inputs.data(), ds.inputs.size() * sizeof(float));
  put(ds.targets.data(), ds.targets.size() * sizeof(float));
  write_file(path, bytes);
}

pipeline::WindowedDataset read_windows(const fs::path& path) {
  const std::string bytes = read_file(path);
  constexpr std::size_t header = 8 + 4 * sizeof(std::uint64_t);
  if (bytes.size() < header || std::string_view(bytes).substr(0, 8) != kWindowMagic) {
    throw DataError(path.string() + ": not a window file (bad magic)");
  }
  std::uint64_t h[4];
  std::memcpy(h, bytes.data() + 8, sizeof h);
  pipeline::WindowedDataset ds;
  ds.spec = {h[1], h[2], h[3]};
  try {
    ds.spec.validate();
  } catch (const Error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  const std::uint64_t n = h[0];
  if (n > (bytes.size() - header) / sizeof(float) / (ds.spec.window_len + 1) ||
      bytes.size() != header + n * (ds.spec.window_len + 1) * sizeof(float)) {
    throw DataError(path.string() + ": size does not match the header");
  }
  ds.inputs.resize(n * ds.spec.window_len);
  ds.targets.resize(n);
  std::memcpy(ds.inputs.data(), bytes.data() + header, ds.inputs.size() * sizeof(float));
  std::memcpy(ds.targets.data(), bytes.data() + header + ds.inputs.size() * sizeof(float), n * sizeof(float));
  ds.centers.resize(n);
  for (std::size_t k = 0; k < n; ++k) ds.centers[k] = k * ds.spec.stride + ds.spec.center_index;
  return ds;
}

}  // namespace amda::io
