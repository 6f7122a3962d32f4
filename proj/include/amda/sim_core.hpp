#pragma once

// Parametric generator of industrial facility load data: weather, five
// appliance traces (EVSE, PV, CS, CHP, BA) and the aggregate grid signal.
//
// Sign convention: consumers are >= 0, producers (PV, CHP) are <= 0, and the
// aggregate is the plain sum of the five appliance columns.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "amda/appliance.hpp"

namespace amda::sim {

enum class FacilityType { Office, Dealer, Logistics };
enum class Location { Offenbach, LosAngeles, Tokyo };

std::string_view name_of(FacilityType type);
std::string_view name_of(Location location);
FacilityType parse_facility_type(std::string_view text);
Location parse_location(std::string_view text);

struct LocationParams {
  Location name = Location::Offenbach;
  double latitude_deg = 50.1;
  double mean_temp = 283.3;     // K
  double seasonal_amp = 9.5;    // K
  double diurnal_amp = 4.5;     // K
  int seasonal_phase = 200;     // zero-based day of year of the seasonal peak
  double cloudiness = 0.5;      // mean cloud factor in [0, 1]
  double weather_noise = 3.0;   // K, stationary std of the temperature anomaly
  int workweek = 5;             // workdays per week, Monday first
  double work_start_hour = 7.0;
  double work_end_hour = 17.0;
  std::vector<int> holidays;    // zero-based days of year
};

/// Amplitude multipliers adjusted by calibrate_facility().
struct Multipliers {
  double evse = 1.0;
  double ba = 1.0;
  double chp = 1.0;

  bool operator==(const Multipliers&) const = default;
};

struct FacilityConfig {
  FacilityType facility_type = FacilityType::Office;
  LocationParams location;
  double yearly_grid_demand = 0;  // MWh
  double evse_yearly_energy = 0;  // MWh
  double pv_power_per_m2 = 0;     // W
  double pv_area = 0;             // m^2
  double cs_nominal_power = 0;    // kW
  double cs_usage_hours = 0;      // h per year at the cooling cap
  double chp_nominal_power = 0;   // kW
  double chp_efficiency = 0.35;
  double ba_yearly_demand = 0;    // MWh
  double ba_server_power = 0;     // kW
  bool server_cooling = false;
  int sample_period = 60;         // s
  int year_length = 525600;       // samples
  std::uint64_t seed = 0;

  // Surrogate parameters not covered by the facility table.
  double evse_charger_power = 22.0;  // kW per charging point
  int evse_chargers = 8;
  double evse_sessions_per_day = 6.0;
  double cs_setpoint = 295.15;      // K
  double cs_solar_gain = 3.0;       // K per kW/m^2 of global radiation
  double chp_heating_base = 291.15; // K
  double chp_hot_water_heat = 1.0;  // K-equivalent, always present
  double chp_process_heat = 3.0;    // K-equivalent during occupied hours
  double chp_floor_fraction = 0.05;

  Multipliers multipliers;

  /// "office-offenbach" style identifier.
  std::string id() const;
};

/// Throws ConfigError describing the first violated constraint.
void validate(const FacilityConfig& cfg);

/// Uniform sampling grid shared by all traces of a dataset.
struct Timeline {
  std::int64_t start = 0;  // epoch seconds
  int period = 60;         // s
  std::size_t length = 0;

  std::int64_t at(std::size_t i) const { return start + static_cast<std::int64_t>(i) * period; }
  bool operator==(const Timeline&) const = default;
};

struct WeatherTrace {
  Timeline timeline;
  std::vector<double> temperature;        // K
  std::vector<double> diffuse_radiation;  // W/m^2
  std::vector<double> direct_radiation;   // W/m^2

  std::size_t size() const { return temperature.size(); }
};

struct ApplianceTrace {
  ApplianceKind kind = ApplianceKind::EVSE;
  std::vector<double> values;  // W, signed

  ApplianceRole role() const { return role_of(kind); }
};

struct FacilityDataset {
  std::string id;
  std::optional<FacilityConfig> config;
  WeatherTrace weather;
  std::array<ApplianceTrace, kApplianceCount> appliances;
  std::vector<double> aggregate;  // W, signed

  const Timeline& timeline() const { return weather.timeline; }
  std::size_t size() const { return aggregate.size(); }
  ApplianceTrace& appliance(ApplianceKind k) { return appliances[index_of(k)]; }
  const ApplianceTrace& appliance(ApplianceKind k) const { return appliances[index_of(k)]; }

  /// Recomputes the aggregate as the exact column sum.
  void recompute_aggregate();
};

/// Per-sample calendar helpers for a configuration.
bool is_workday(const LocationParams& loc, int day_of_year);
/// Occupancy indicator in [0, 1] with half-hour ramps at the work-hour edges.
double occupancy(const LocationParams& loc, int day_of_year, double hour);

/// Sine of the solar elevation at local solar time.
double solar_elevation_sine(double latitude_deg, int day_of_year, double hour);

WeatherTrace simulate_weather(const LocationParams& loc, const FacilityConfig& cfg);

/// Absolute power cap (W) the given appliance never exceeds under `cfg`.
double power_cap(ApplianceKind kind, const FacilityConfig& cfg);

ApplianceTrace simulate_appliance(ApplianceKind kind, const FacilityConfig& cfg,
                                  const WeatherTrace& weather);

/// Yearly energy (MWh) of a trace sampled every `period` seconds,
/// rectangle rule (sample-and-hold).
double energy_mwh(const std::vector<double>& values, int period);

struct CalibrationResidual {
  std::string target;
  double achieved = 0;  // MWh
  double wanted = 0;    // MWh
  double relative() const { return wanted != 0 ? (achieved - wanted) / wanted : 0.0; }
};

struct CalibrationReport {
  int iterations = 0;
  std::vector<CalibrationResidual> residuals;
  double max_relative_residual() const;
};

inline constexpr int kMaxCalibrationIterations = 20;
inline constexpr double kCalibrationTolerance = 0.05;

/// Fixed-point adjustment of the EVSE, BA and CHP multipliers so that the
/// yearly EVSE and BA energies and the net grid draw hit their targets.
/// Throws NumericError with the per-target residuals on failure.
FacilityConfig calibrate_facility(const FacilityConfig& cfg, CalibrationReport* report = nullptr);

FacilityDataset simulate_facility(const FacilityConfig& cfg);

/// Preset names: "<office|dealer|logistics>-<offenbach|los-angeles|tokyo>".
std::vector<std::string> preset_names();
FacilityConfig preset(std::string_view name);
LocationParams location_preset(Location location, int workweek);

}  // namespace amda::sim
