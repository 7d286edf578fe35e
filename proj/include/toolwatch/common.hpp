#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace toolwatch {

/// Base exception for every recoverable failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tool wear state. Underlying value is the ordinal severity.
enum class ToolCondition : std::uint8_t {
    GoodCondition = 0,
    InitialWear = 1,
    ProgressedWear = 2,
};

inline constexpr std::size_t kNumClasses = 3;

inline constexpr std::array<ToolCondition, kNumClasses> kAllConditions = {
    ToolCondition::GoodCondition, ToolCondition::InitialWear, ToolCondition::ProgressedWear};

constexpr std::size_t severity(ToolCondition c) { return static_cast<std::size_t>(c); }

ToolCondition condition_from_severity(long value);

/// Display name, e.g. "Good Condition".
std::string_view display_name(ToolCondition c);

/// Identifier used in files and JSON, e.g. "GoodCondition".
std::string_view key_name(ToolCondition c);

/// Accepts either the key name or the numeric severity ("0".."2").
ToolCondition parse_condition(std::string_view text);

/// Selects the serial reference path or the OpenMP path of a kernel.
enum class Execution { serial, parallel };

}  // namespace toolwatch
