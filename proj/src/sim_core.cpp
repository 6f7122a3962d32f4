#include "amda/sim_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>

#include "amda/calendar.hpp"
#include "amda/error.hpp"
#include "amda/random.hpp"

namespace amda::sim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kDiffuseFraction = 0.35;
constexpr double kCloudSpread = 0.25;
constexpr double kAnomalyTimescale = 2.0 * 86400.0;  // s
constexpr double kAnomalyBound = 2.5;                // in units of weather_noise
constexpr double kNoiseFraction = 0.01;
constexpr double kServerCoolingCop = 3.0;
constexpr double kChpGainUnit = 10.0;  // K of heating demand at which gain 1 hits nominal
constexpr double kBaDailySpread = 0.08;
constexpr double kBaDailyClip = 2.0;
constexpr double kBaOffHoursLevel = 0.35;
constexpr double kBaNonWorkdayLevel = 0.25;

int samples_per_day(const FacilityConfig& cfg) {
  return static_cast<int>(calendar::kSecondsPerDay / cfg.sample_period);
}

/// Location-level stream so facilities at one site share their weather.
std::uint64_t weather_seed(const FacilityConfig& cfg, std::string_view stream) {
  return derive_seed(cfg.seed, std::string(name_of(cfg.location.name)) + "/" + std::string(stream));
}

std::uint64_t appliance_seed(const FacilityConfig& cfg, ApplianceKind kind) {
  return derive_seed(cfg.seed, std::string(name_of(cfg.facility_type)) + "/" +
                                   std::string(name_of(cfg.location.name)) + "/" +
                                   std::string(amda::name_of(kind)));
}

/// Gaussian noise with sigma = 1% of an hourly running mean of |x|, applied
/// to non-zero samples only and clamped to [lo, hi].
void add_noise(std::vector<double>& x, Rng& rng, double lo, double hi, int period) {
  const double alpha = std::min(1.0, static_cast<double>(period) / 3600.0);
  double running = 0.0;
  bool primed = false;
  for (double& v : x) {
    const double mag = std::abs(v);
    running = primed ? running + alpha * (mag - running) : mag;
    primed = true;
    const double z = rng.normal();
    if (v == 0.0) continue;
    v = std::clamp(v + kNoiseFraction * running * z, lo, hi);
  }
}

double total_radiation(const WeatherTrace& w, std::size_t i) {
  return w.direct_radiation[i] + w.diffuse_radiation[i];
}

/// Mean of the BA schedule level over the year (without daily jitter).
double ba_mean_level(const FacilityConfig& cfg) {
  const int spd = samples_per_day(cfg);
  const int days = cfg.year_length / spd;
  double sum = 0.0;
  for (int d = 0; d < days; ++d) {
    const bool work = is_workday(cfg.location, d);
    for (int s = 0; s < spd; ++s) {
      const double hour = static_cast<double>(s) * cfg.sample_period / 3600.0;
      sum += work ? kBaOffHoursLevel + (1.0 - kBaOffHoursLevel) * occupancy(cfg.location, d, hour)
                  : kBaNonWorkdayLevel;
    }
  }
  return sum / static_cast<double>(days * spd);
}

/// Schedule amplitude (W) such that multiplier 1 roughly meets the BA target.
double ba_base_amplitude(const FacilityConfig& cfg) {
  const double year_hours = static_cast<double>(cfg.year_length) * cfg.sample_period / 3600.0;
  const double mean_w = cfg.ba_yearly_demand * 1e6 / year_hours;
  const double server_w = cfg.ba_server_power * 1e3;
  return (mean_w - server_w) / ba_mean_level(cfg);
}

int workdays_in_year(const FacilityConfig& cfg) {
  const int days = cfg.year_length / samples_per_day(cfg);
  int n = 0;
  for (int d = 0; d < days; ++d) n += is_workday(cfg.location, d) ? 1 : 0;
  return n;
}

ApplianceTrace simulate_pv(const FacilityConfig& cfg, const WeatherTrace& w) {
  const double peak = power_cap(ApplianceKind::PV, cfg);
  ApplianceTrace t{ApplianceKind::PV, std::vector<double>(w.size())};
  for (std::size_t i = 0; i < w.size(); ++i) {
    t.values[i] = std::clamp(-peak * total_radiation(w, i) / 1000.0, -peak, 0.0);
  }
  Rng rng(appliance_seed(cfg, ApplianceKind::PV));
  add_noise(t.values, rng, -peak, 0.0, cfg.sample_period);
  return t;
}

ApplianceTrace simulate_cs(const FacilityConfig& cfg, const WeatherTrace& w) {
  const double nominal = power_cap(ApplianceKind::CS, cfg);
  const double baseline = cfg.server_cooling ? cfg.ba_server_power * 1e3 / kServerCoolingCop : 0.0;
  std::vector<double> demand(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    demand[i] = std::max(0.0, w.temperature[i] - cfg.cs_setpoint +
                                  cfg.cs_solar_gain * total_radiation(w, i) / 1000.0);
  }
  // Gain chosen so the cap is reached for exactly cs_usage_hours per year.
  const auto at_cap = static_cast<std::size_t>(
      std::llround(cfg.cs_usage_hours * 3600.0 / cfg.sample_period));
  double gain = 0.0;
  if (at_cap > 0 && at_cap <= demand.size()) {
    std::vector<double> sorted = demand;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(at_cap - 1),
                     sorted.end(), std::greater<>());
    const double threshold = sorted[at_cap - 1];
    if (threshold > 0.0) gain = (nominal - baseline) / threshold;
  }
  ApplianceTrace t{ApplianceKind::CS, std::vector<double>(w.size())};
  for (std::size_t i = 0; i < w.size(); ++i) {
    t.values[i] = std::min(nominal, baseline + gain * demand[i]);
  }
  Rng rng(appliance_seed(cfg, ApplianceKind::CS));
  add_noise(t.values, rng, 0.0, nominal, cfg.sample_period);
  return t;
}

ApplianceTrace simulate_chp(const FacilityConfig& cfg, const WeatherTrace& w) {
  const double nominal = power_cap(ApplianceKind::CHP, cfg);
  const double floor = cfg.chp_floor_fraction * nominal;
  const double gain = cfg.multipliers.chp * nominal / kChpGainUnit;
  const int spd = samples_per_day(cfg);
  std::vector<double> magnitude(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const int day = static_cast<int>(i / static_cast<std::size_t>(spd));
    const double hour = static_cast<double>(i % static_cast<std::size_t>(spd)) * cfg.sample_period / 3600.0;
    const double heat = std::max(0.0, cfg.chp_heating_base - w.temperature[i]) + cfg.chp_hot_water_heat +
                        cfg.chp_process_heat * occupancy(cfg.location, day, hour);
    magnitude[i] = std::clamp(gain * heat, floor, nominal);
  }
  Rng rng(appliance_seed(cfg, ApplianceKind::CHP));
  add_noise(magnitude, rng, floor, nominal, cfg.sample_period);
  ApplianceTrace t{ApplianceKind::CHP, std::move(magnitude)};
  for (double& v : t.values) v = -v;
  return t;
}

ApplianceTrace simulate_evse(const FacilityConfig& cfg, const WeatherTrace& w) {
  const double power = cfg.evse_charger_power * 1e3;
  const double cap = power_cap(ApplianceKind::EVSE, cfg);
  const int spd = samples_per_day(cfg);
  const int days = static_cast<int>(w.size()) / spd;
  const double expected_sessions = cfg.evse_sessions_per_day * workdays_in_year(cfg);
  const double session_wh = cfg.evse_yearly_energy * 1e6 / std::max(1.0, expected_sessions);
  const double sample_h = cfg.sample_period / 3600.0;

  ApplianceTrace t{ApplianceKind::EVSE, std::vector<double>(w.size(), 0.0)};
  std::vector<std::size_t> busy_until(static_cast<std::size_t>(cfg.evse_chargers), 0);
  Rng rng(appliance_seed(cfg, ApplianceKind::EVSE));
  struct Session {
    double arrival_hour;
    double energy_share;
  };
  std::vector<Session> sessions;
  for (int d = 0; d < days; ++d) {
    if (!is_workday(cfg.location, d)) continue;
    sessions.clear();
    const int count = rng.poisson(cfg.evse_sessions_per_day);
    for (int k = 0; k < count; ++k) {
      const double arrival = std::clamp(rng.normal(cfg.location.work_start_hour + 1.5, 1.5), 0.0, 22.0);
      sessions.push_back({arrival, rng.uniform(0.5, 1.5)});
    }
    std::sort(sessions.begin(), sessions.end(),
              [](const Session& a, const Session& b) { return a.arrival_hour < b.arrival_hour; });
    for (const Session& s : sessions) {
      const std::size_t start = static_cast<std::size_t>(d) * static_cast<std::size_t>(spd) +
                                static_cast<std::size_t>(s.arrival_hour / sample_h);
      auto charger = std::find_if(busy_until.begin(), busy_until.end(),
                                  [&](std::size_t until) { return until <= start; });
      if (charger == busy_until.end()) continue;  // all points occupied: vehicle leaves
      double remaining = cfg.multipliers.evse * session_wh * s.energy_share;
      std::size_t i = start;
      while (remaining > 0.0 && i < t.values.size()) {
        const double p = std::min(power, remaining / sample_h);
        t.values[i] += p;
        remaining -= p * sample_h;
        ++i;
      }
      *charger = i;
    }
  }
  add_noise(t.values, rng, 0.0, cap, cfg.sample_period);
  return t;
}

ApplianceTrace simulate_ba(const FacilityConfig& cfg, const WeatherTrace& w) {
  const double server = cfg.ba_server_power * 1e3;
  const double amplitude = cfg.multipliers.ba * ba_base_amplitude(cfg);
  const double cap = power_cap(ApplianceKind::BA, cfg);
  const int spd = samples_per_day(cfg);
  ApplianceTrace t{ApplianceKind::BA, std::vector<double>(w.size())};
  Rng rng(appliance_seed(cfg, ApplianceKind::BA));
  double daily = 1.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const int day = static_cast<int>(i / static_cast<std::size_t>(spd));
    const std::size_t slot = i % static_cast<std::size_t>(spd);
    if (slot == 0) daily = 1.0 + kBaDailySpread * std::clamp(rng.normal(), -kBaDailyClip, kBaDailyClip);
    const double hour = static_cast<double>(slot) * cfg.sample_period / 3600.0;
    const double level = is_workday(cfg.location, day)
                             ? kBaOffHoursLevel + (1.0 - kBaOffHoursLevel) * occupancy(cfg.location, day, hour)
                             : kBaNonWorkdayLevel;
    t.values[i] = server + amplitude * level * daily;
  }
  add_noise(t.values, rng, 0.0, cap, cfg.sample_period);
  return t;
}

}  // namespace

std::string_view name_of(FacilityType type) {
  switch (type) {
    case FacilityType::Office: return "office";
    case FacilityType::Dealer: return "dealer";
    case FacilityType::Logistics: return "logistics";
  }
  return "?";
}

std::string_view name_of(Location location) {
  switch (location) {
    case Location::Offenbach: return "offenbach";
    case Location::LosAngeles: return "los-angeles";
    case Location::Tokyo: return "tokyo";
  }
  return "?";
}

FacilityType parse_facility_type(std::string_view text) {
  for (auto t : {FacilityType::Office, FacilityType::Dealer, FacilityType::Logistics}) {
    if (text == name_of(t)) return t;
  }
  throw ConfigError("unknown facility type '" + std::string(text) + "'");
}

Location parse_location(std::string_view text) {
  for (auto l : {Location::Offenbach, Location::LosAngeles, Location::Tokyo}) {
    if (text == name_of(l)) return l;
  }
  throw ConfigError("unknown location '" + std::string(text) + "'");
}

std::string FacilityConfig::id() const {
  return std::string(name_of(facility_type)) + "-" + std::string(name_of(location.name));
}

void validate(const FacilityConfig& cfg) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  const LocationParams& loc = cfg.location;
  require(loc.cloudiness >= 0.0 && loc.cloudiness <= 1.0, "cloudiness must lie in [0, 1]");
  require(loc.seasonal_amp >= 0.0 && loc.diurnal_amp >= 0.0 && loc.weather_noise >= 0.0,
          "temperature amplitudes must be non-negative");
  require(loc.mean_temp > 0.0, "mean temperature must be positive (kelvin)");
  require(loc.latitude_deg > -90.0 && loc.latitude_deg < 90.0, "latitude out of range");
  require(loc.workweek == 5 || loc.workweek == 6 || loc.workweek == 7, "workweek must be 5, 6 or 7");
  require(loc.work_start_hour >= 0.0 && loc.work_start_hour < loc.work_end_hour && loc.work_end_hour <= 24.0,
          "work hours must satisfy 0 <= start < end <= 24");
  for (int h : loc.holidays) require(h >= 0 && h < calendar::kDaysPerYear, "holiday outside the year");

  require(cfg.yearly_grid_demand > 0, "yearly_grid_demand must be positive");
  require(cfg.evse_yearly_energy > 0, "evse_yearly_energy must be positive");
  require(cfg.pv_power_per_m2 > 0, "pv_power_per_m2 must be positive");
  require(cfg.pv_area > 0, "pv_area must be positive");
  require(cfg.cs_nominal_power > 0, "cs_nominal_power must be positive");
  require(cfg.cs_usage_hours > 0, "cs_usage_hours must be positive");
  require(cfg.chp_nominal_power > 0, "chp_nominal_power must be positive");
  require(cfg.chp_efficiency > 0 && cfg.chp_efficiency <= 1, "chp_efficiency must lie in (0, 1]");
  require(cfg.ba_yearly_demand > 0, "ba_yearly_demand must be positive");
  require(cfg.ba_server_power > 0, "ba_server_power must be positive");
  require(cfg.evse_charger_power > 0 && cfg.evse_chargers > 0, "EVSE charger power and count must be positive");
  require(cfg.evse_sessions_per_day > 0, "evse_sessions_per_day must be positive");
  require(cfg.chp_floor_fraction > 0 && cfg.chp_floor_fraction < 1, "chp_floor_fraction must lie in (0, 1)");
  require(cfg.multipliers.evse > 0 && cfg.multipliers.ba > 0 && cfg.multipliers.chp > 0,
          "multipliers must be positive");
  require(!cfg.server_cooling || cfg.ba_server_power / kServerCoolingCop < cfg.cs_nominal_power,
          "server cooling baseline exceeds cs_nominal_power");

  require(cfg.sample_period > 0 && calendar::kSecondsPerDay % cfg.sample_period == 0,
          "sample_period must divide one day");
  const int spd = samples_per_day(cfg);
  require(cfg.year_length > 0 && cfg.year_length % spd == 0,
          "year_length must be a whole number of days (" + std::to_string(spd) + " samples per day)");
  require(static_cast<std::int64_t>(cfg.year_length) * cfg.sample_period ==
              calendar::kDaysPerYear * calendar::kSecondsPerDay,
          "year_length x sample_period must span one non-leap year");

  const double year_hours = static_cast<double>(cfg.year_length) * cfg.sample_period / 3600.0;
  require(cfg.ba_yearly_demand * 1e6 / year_hours > cfg.ba_server_power * 1e3,
          "ba_yearly_demand must exceed the server baseline");
}

void FacilityDataset::recompute_aggregate() {
  const std::size_t n = appliances[0].values.size();
  aggregate.assign(n, 0.0);
  for (const ApplianceTrace& a : appliances) {
    if (a.values.size() != n) throw DataError("appliance traces differ in length");
    for (std::size_t t = 0; t < n; ++t) aggregate[t] += a.values[t];
  }
}

bool is_workday(const LocationParams& loc, int day_of_year) {
  const int weekday = (calendar::kYearStartWeekday + day_of_year) % 7;
  if (weekday >= loc.workweek) return false;
  if (loc.workweek == 7) return true;
  return std::find(loc.holidays.begin(), loc.holidays.end(), day_of_year) == loc.holidays.end();
}

double occupancy(const LocationParams& loc, int day_of_year, double hour) {
  if (!is_workday(loc, day_of_year)) return 0.0;
  constexpr double half_ramp = 0.25;
  const double rise = std::clamp((hour - loc.work_start_hour + half_ramp) / (2 * half_ramp), 0.0, 1.0);
  const double fall = std::clamp((loc.work_end_hour + half_ramp - hour) / (2 * half_ramp), 0.0, 1.0);
  return std::min(rise, fall);
}

double solar_elevation_sine(double latitude_deg, int day_of_year, double hour) {
  const double declination =
      23.44 * std::numbers::pi / 180.0 * std::sin(kTwoPi * (284.0 + day_of_year + 1) / 365.0);
  const double hour_angle = (hour - 12.0) * 15.0 * std::numbers::pi / 180.0;
  const double lat = latitude_deg * std::numbers::pi / 180.0;
  return std::sin(lat) * std::sin(declination) +
         std::cos(lat) * std::cos(declination) * std::cos(hour_angle);
}

WeatherTrace simulate_weather(const LocationParams& loc, const FacilityConfig& cfg) {
  if (cfg.sample_period <= 0 || calendar::kSecondsPerDay % cfg.sample_period != 0) {
    throw ConfigError("sample_period must divide one day");
  }
  const int spd = samples_per_day(cfg);
  if (cfg.year_length <= 0 || cfg.year_length % spd != 0) {
    throw ConfigError("year_length " + std::to_string(cfg.year_length) +
                      " is not divisible by samples per day " + std::to_string(spd));
  }
  const auto n = static_cast<std::size_t>(cfg.year_length);
  WeatherTrace w;
  w.timeline = Timeline{calendar::kYearStart, cfg.sample_period, n};
  w.temperature.resize(n);
  w.diffuse_radiation.resize(n);
  w.direct_radiation.resize(n);

  Rng temp_rng(weather_seed(cfg, "temperature"));
  Rng cloud_rng(weather_seed(cfg, "cloud"));
  const double phi = std::exp(-cfg.sample_period / kAnomalyTimescale);
  const double innovation = loc.weather_noise * std::sqrt(1.0 - phi * phi);
  const double bound = kAnomalyBound * loc.weather_noise;
  double anomaly = std::clamp(loc.weather_noise * temp_rng.normal(), -bound, bound);
  double cloud = loc.cloudiness;

  for (std::size_t i = 0; i < n; ++i) {
    const int day = static_cast<int>(i / static_cast<std::size_t>(spd));
    const std::size_t slot = i % static_cast<std::size_t>(spd);
    const double hour = static_cast<double>(slot) * cfg.sample_period / 3600.0;
    if (slot == 0) cloud = std::clamp(loc.cloudiness + kCloudSpread * cloud_rng.normal(), 0.0, 1.0);
    if (i > 0) anomaly = std::clamp(phi * anomaly + innovation * temp_rng.normal(), -bound, bound);

    const double season = std::cos(kTwoPi * (day + hour / 24.0 - loc.seasonal_phase) / 365.0);
    const double diurnal = std::cos(kTwoPi * (hour - 15.0) / 24.0);
    w.temperature[i] = loc.mean_temp + loc.seasonal_amp * season + loc.diurnal_amp * diurnal + anomaly;

    const double sin_elev = solar_elevation_sine(loc.latitude_deg, day, hour);
    double clear = 0.0;
    if (sin_elev > 0.0) clear = 1098.0 * sin_elev * std::exp(-0.057 / sin_elev);
    w.direct_radiation[i] = clear * (1.0 - cloud);
    w.diffuse_radiation[i] = kDiffuseFraction * clear * cloud;
  }
  return w;
}

double power_cap(ApplianceKind kind, const FacilityConfig& cfg) {
  switch (kind) {
    case ApplianceKind::EVSE: return cfg.evse_chargers * cfg.evse_charger_power * 1e3;
    case ApplianceKind::PV: return cfg.pv_power_per_m2 * cfg.pv_area;
    case ApplianceKind::CS: return cfg.cs_nominal_power * 1e3;
    case ApplianceKind::CHP: return cfg.chp_nominal_power * 1e3;
    case ApplianceKind::BA: {
      const double peak = cfg.ba_server_power * 1e3 +
                          cfg.multipliers.ba * ba_base_amplitude(cfg) * (1.0 + kBaDailySpread * kBaDailyClip);
      return peak * (1.0 + 5.0 * kNoiseFraction);
    }
  }
  throw ConfigError("unknown appliance kind");
}

ApplianceTrace simulate_appliance(ApplianceKind kind, const FacilityConfig& cfg, const WeatherTrace& weather) {
  validate(cfg);
  if (weather.size() != static_cast<std::size_t>(cfg.year_length)) {
    throw DataError("weather length " + std::to_string(weather.size()) + " != year_length " +
                    std::to_string(cfg.year_length));
  }
  switch (kind) {
    case ApplianceKind::EVSE: return simulate_evse(cfg, weather);
    case ApplianceKind::PV: return simulate_pv(cfg, weather);
    case ApplianceKind::CS: return simulate_cs(cfg, weather);
    case ApplianceKind::CHP: return simulate_chp(cfg, weather);
    case ApplianceKind::BA: return simulate_ba(cfg, weather);
  }
  throw ConfigError("unknown appliance kind");
}

double energy_mwh(const std::vector<double>& values, int period) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum * period / 3600.0 / 1e6;
}

double CalibrationReport::max_relative_residual() const {
  double worst = 0.0;
  for (const auto& r : residuals) worst = std::max(worst, std::abs(r.relative()));
  return worst;
}

FacilityConfig calibrate_facility(const FacilityConfig& cfg, CalibrationReport* report) {
  validate(cfg);
  FacilityConfig c = cfg;
  const WeatherTrace weather = simulate_weather(c.location, c);
  const double e_pv = energy_mwh(simulate_appliance(ApplianceKind::PV, c, weather).values, c.sample_period);
  const double e_cs = energy_mwh(simulate_appliance(ApplianceKind::CS, c, weather).values, c.sample_period);
  const double duration_h = static_cast<double>(c.year_length) * c.sample_period / 3600.0;
  const double chp_floor = c.chp_floor_fraction * c.chp_nominal_power * duration_h / 1e3;
  const double chp_ceiling = c.chp_nominal_power * duration_h / 1e3;

  auto describe = [](const CalibrationReport& r) {
    std::ostringstream os;
    for (const auto& x : r.residuals) {
      os << " " << x.target << ": " << x.achieved << " MWh vs " << x.wanted << " MWh ("
         << 100.0 * x.relative() << "%);";
    }
    return os.str();
  };

  // CHP energy is monotone but convex near the floor in its multiplier, so it
  // is solved with a bracketing secant (Illinois) step instead of a ratio.
  struct Probe {
    double m;
    double error;
  };
  std::optional<Probe> below, above;
  bool below_stale = false, above_stale = false;

  CalibrationReport local;
  for (int it = 1; it <= kMaxCalibrationIterations; ++it) {
    const double e_evse =
        energy_mwh(simulate_appliance(ApplianceKind::EVSE, c, weather).values, c.sample_period);
    const double e_ba = energy_mwh(simulate_appliance(ApplianceKind::BA, c, weather).values, c.sample_period);
    const double e_chp =
        energy_mwh(simulate_appliance(ApplianceKind::CHP, c, weather).values, c.sample_period);
    const double e_grid = e_evse + e_ba + e_cs + e_pv + e_chp;

    local.iterations = it;
    local.residuals = {{"evse", e_evse, c.evse_yearly_energy},
                       {"ba", e_ba, c.ba_yearly_demand},
                       {"grid", e_grid, c.yearly_grid_demand}};
    if (report) *report = local;
    if (local.max_relative_residual() < 1e-4) return c;
    if (it == kMaxCalibrationIterations) break;

    c.multipliers.evse *= c.evse_yearly_energy / e_evse;
    c.multipliers.ba *= c.ba_yearly_demand / e_ba;
    const double chp_wanted = c.ba_yearly_demand + c.evse_yearly_energy + e_cs + e_pv - c.yearly_grid_demand;
    if (chp_wanted <= chp_floor || chp_wanted >= chp_ceiling) {
      throw NumericError("calibration infeasible for " + c.id() + ": CHP would need " +
                         std::to_string(chp_wanted) + " MWh, feasible range (" + std::to_string(chp_floor) +
                         ", " + std::to_string(chp_ceiling) + ");" + describe(local));
    }
    const Probe now{c.multipliers.chp, -e_chp - chp_wanted};
    if (now.error < 0) {
      below = now;
      below_stale = false;
      if (above) {
        if (above_stale) above->error *= 0.5;
        above_stale = true;
      }
    } else {
      above = now;
      above_stale = false;
      if (below) {
        if (below_stale) below->error *= 0.5;
        below_stale = true;
      }
    }
    if (below && above) {
      c.multipliers.chp = below->m + (above->m - below->m) * (-below->error) / (above->error - below->error);
    } else {
      const double ratio = (chp_wanted - chp_floor) / std::max(-e_chp - chp_floor, 1e-9);
      c.multipliers.chp *= std::clamp(ratio, 0.25, 4.0);
    }
  }
  if (local.max_relative_residual() > kCalibrationTolerance) {
    throw NumericError("calibration of " + c.id() + " did not converge in " +
                       std::to_string(kMaxCalibrationIterations) + " iterations;" + describe(local));
  }
  return c;
}

FacilityDataset simulate_facility(const FacilityConfig& cfg) {
  const FacilityConfig calibrated = calibrate_facility(cfg);
  FacilityDataset ds;
  ds.id = calibrated.id();
  ds.config = calibrated;
  ds.weather = simulate_weather(calibrated.location, calibrated);
  for (ApplianceKind k : kAllAppliances) {
    ds.appliance(k) = simulate_appliance(k, calibrated, ds.weather);
  }
  ds.recompute_aggregate();
  return ds;
}

}  // namespace amda::sim
