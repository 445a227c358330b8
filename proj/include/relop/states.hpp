#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <stdexcept>
#include <string_view>

namespace relop {

struct StateInfo {
  std::string_view code;
  std::string_view name;
};

// 50 states plus DC, alphabetical by code.
inline constexpr std::array<StateInfo, 51> kStates{{
    {"AK", "Alaska"},         {"AL", "Alabama"},        {"AR", "Arkansas"},
    {"AZ", "Arizona"},        {"CA", "California"},     {"CO", "Colorado"},
    {"CT", "Connecticut"},    {"DC", "District of Columbia"},
    {"DE", "Delaware"},       {"FL", "Florida"},        {"GA", "Georgia"},
    {"HI", "Hawaii"},         {"IA", "Iowa"},           {"ID", "Idaho"},
    {"IL", "Illinois"},       {"IN", "Indiana"},        {"KS", "Kansas"},
    {"KY", "Kentucky"},       {"LA", "Louisiana"},      {"MA", "Massachusetts"},
    {"MD", "Maryland"},       {"ME", "Maine"},          {"MI", "Michigan"},
    {"MN", "Minnesota"},      {"MO", "Missouri"},       {"MS", "Mississippi"},
    {"MT", "Montana"},        {"NC", "North Carolina"}, {"ND", "North Dakota"},
    {"NE", "Nebraska"},       {"NH", "New Hampshire"},  {"NJ", "New Jersey"},
    {"NM", "New Mexico"},     {"NV", "Nevada"},         {"NY", "New York"},
    {"OH", "Ohio"},           {"OK", "Oklahoma"},       {"OR", "Oregon"},
    {"PA", "Pennsylvania"},   {"RI", "Rhode Island"},   {"SC", "South Carolina"},
    {"SD", "South Dakota"},   {"TN", "Tennessee"},      {"TX", "Texas"},
    {"UT", "Utah"},           {"VA", "Virginia"},       {"VT", "Vermont"},
    {"WA", "Washington"},     {"WI", "Wisconsin"},      {"WV", "West Virginia"},
    {"WY", "Wyoming"},
}};

inline bool is_state_code(std::string_view code) {
  return std::any_of(kStates.begin(), kStates.end(),
                     [&](const StateInfo& s) { return s.code == code; });
}

/// Two-letter region code restricted to the closed 51-value set.
class StateCode {
public:
  StateCode() = default;
  explicit StateCode(std::string_view code) : code_(code) {
    if (!is_state_code(code)) throw std::invalid_argument("unknown state code: " + code_);
  }
  const std::string& str() const { return code_; }
  auto operator<=>(const StateCode&) const = default;

private:
  std::string code_{"AK"};
};

}  // namespace relop
