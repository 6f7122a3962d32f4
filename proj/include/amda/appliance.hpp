#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace amda {

/// The five appliance groups of a facility, in CSV column order.
enum class ApplianceKind : std::size_t { EVSE = 0, PV = 1, CS = 2, CHP = 3, BA = 4 };

enum class ApplianceRole { consumer, producer };

inline constexpr std::size_t kApplianceCount = 5;

inline constexpr std::array<ApplianceKind, kApplianceCount> kAllAppliances{
    ApplianceKind::EVSE, ApplianceKind::PV, ApplianceKind::CS, ApplianceKind::CHP,
    ApplianceKind::BA};

constexpr std::size_t index_of(ApplianceKind kind) { return static_cast<std::size_t>(kind); }

constexpr ApplianceRole role_of(ApplianceKind kind) {
  return (kind == ApplianceKind::PV || kind == ApplianceKind::CHP) ? ApplianceRole::producer
                                                                    : ApplianceRole::consumer;
}

constexpr std::string_view name_of(ApplianceKind kind) {
  constexpr std::array<std::string_view, kApplianceCount> names{"EVSE", "PV", "CS", "CHP", "BA"};
  return names[index_of(kind)];
}

/// Case-insensitive lookup; throws ConfigError for unknown names.
ApplianceKind parse_appliance(std::string_view name);

}  // namespace amda
