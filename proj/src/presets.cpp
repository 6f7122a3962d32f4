#include <algorithm>
#include <cctype>
#include <string>

#include "amda/appliance.hpp"
#include "amda/calendar.hpp"
#include "amda/error.hpp"
#include "amda/sim_core.hpp"

namespace amda {

ApplianceKind parse_appliance(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (ApplianceKind k : kAllAppliances) {
    if (upper == name_of(k)) return k;
  }
  throw ConfigError("unknown appliance '" + std::string(name) + "'");
}

}  // namespace amda

namespace amda::sim {

namespace {

std::vector<int> days(std::initializer_list<const char*> month_days) {
  std::vector<int> out;
  for (const char* md : month_days) out.push_back(calendar::parse_month_day(md));
  return out;
}

struct FacilityRow {
  FacilityType type;
  double grid, evse, pv_per_m2, pv_area, cs_nominal, cs_hours, chp_nominal, ba, server;
  bool server_cooling;
  int workweek;
};

// Yearly energy demand, EVSE charging, PV, CS, CHP and BA parameters per facility type.
constexpr FacilityRow kFacilities[] = {
    {FacilityType::Office, 1334, 32, 210, 2000, 900, 300, 340, 2032, 69, false, 5},
    {FacilityType::Dealer, 162, 33, 150, 2000, 250, 300, 210, 501, 20, false, 6},
    {FacilityType::Logistics, 1689, 32, 150, 10000, 4000, 500, 900, 4341, 20, true, 7},
};

// Outdoor temperature at which cooling starts; tuned per climate.
double cooling_setpoint(Location location) {
  switch (location) {
    case Location::Offenbach: return 296.15;
    case Location::LosAngeles: return 295.15;
    case Location::Tokyo: return 296.65;
  }
  return 295.15;
}

}  // namespace

LocationParams location_preset(Location location, int workweek) {
  LocationParams p;
  p.name = location;
  p.workweek = workweek;
  switch (location) {
    case Location::Offenbach:
      p.latitude_deg = 50.1;
      p.mean_temp = 283.3;
      p.seasonal_amp = 9.5;
      p.diurnal_amp = 4.5;
      p.seasonal_phase = 200;
      p.cloudiness = 0.5;
      p.weather_noise = 3.0;
      p.work_start_hour = 7.0;
      p.work_end_hour = 17.0;
      // Hesse, 2019
      p.holidays = days({"01-01", "04-19", "04-22", "05-01", "05-30", "06-10", "06-20", "10-03", "12-25", "12-26"});
      break;
    case Location::LosAngeles:
      p.latitude_deg = 34.05;
      p.mean_temp = 291.5;
      p.seasonal_amp = 4.0;
      p.diurnal_amp = 5.0;
      p.seasonal_phase = 220;
      p.cloudiness = 0.25;
      p.weather_noise = 2.0;
      p.work_start_hour = 8.0;
      p.work_end_hour = 17.0;
      // US federal, 2019
      p.holidays = days({"01-01", "01-21", "02-18", "05-27", "07-04", "09-02", "10-14", "11-11", "11-28", "12-25"});
      break;
    case Location::Tokyo:
      p.latitude_deg = 35.7;
      p.mean_temp = 289.6;
      p.seasonal_amp = 10.0;
      p.diurnal_amp = 4.0;
      p.seasonal_phase = 215;
      p.cloudiness = 0.45;
      p.weather_noise = 2.5;
      p.work_start_hour = 9.0;
      p.work_end_hour = 18.0;
      // Japan, 2019
      p.holidays = days({"01-01", "01-14", "02-11", "03-21", "04-29", "04-30", "05-01", "05-02", "05-03",
                         "05-06", "07-15", "08-12", "09-16", "09-23", "10-14", "10-22", "11-04"});
      break;
  }
  return p;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const FacilityRow& row : kFacilities) {
    for (auto loc : {Location::Offenbach, Location::LosAngeles, Location::Tokyo}) {
      names.push_back(std::string(name_of(row.type)) + "-" + std::string(name_of(loc)));
    }
  }
  return names;
}

FacilityConfig preset(std::string_view name) {
  for (const FacilityRow& row : kFacilities) {
    for (auto loc : {Location::Offenbach, Location::LosAngeles, Location::Tokyo}) {
      if (name != std::string(name_of(row.type)) + "-" + std::string(name_of(loc))) continue;
      FacilityConfig c;
      c.facility_type = row.type;
      c.location = location_preset(loc, row.workweek);
      c.yearly_grid_demand = row.grid;
      c.evse_yearly_energy = row.evse;
      c.pv_power_per_m2 = row.pv_per_m2;
      c.pv_area = row.pv_area;
      c.cs_nominal_power = row.cs_nominal;
      c.cs_usage_hours = row.cs_hours;
      c.chp_nominal_power = row.chp_nominal;
      c.ba_yearly_demand = row.ba;
      c.ba_server_power = row.server;
      c.server_cooling = row.server_cooling;
      c.cs_setpoint = cooling_setpoint(loc);
      return c;
    }
  }
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

}  // namespace amda::sim
