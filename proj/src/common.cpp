#include "toolwatch/common.hpp"

#include <charconv>

namespace toolwatch {

ToolCondition condition_from_severity(long value) {
    if (value < 0 || value >= static_cast<long>(kNumClasses)) {
        throw Error("tool condition severity out of range: " + std::to_string(value));
    }
    return static_cast<ToolCondition>(value);
}

std::string_view display_name(ToolCondition c) {
    switch (c) {
        case ToolCondition::GoodCondition: return "Good Condition";
        case ToolCondition::InitialWear: return "Initial Wear";
        case ToolCondition::ProgressedWear: return "Progressed Wear";
    }
    return "?";
}

std::string_view key_name(ToolCondition c) {
    switch (c) {
        case ToolCondition::GoodCondition: return "GoodCondition";
        case ToolCondition::InitialWear: return "InitialWear";
        case ToolCondition::ProgressedWear: return "ProgressedWear";
    }
    return "?";
}

ToolCondition parse_condition(std::string_view text) {
    for (ToolCondition c : kAllConditions) {
        if (text == key_name(c) || text == display_name(c)) return c;
    }
    long value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw Error("unknown tool condition '" + std::string(text) + "'");
    }
    return condition_from_severity(value);
}

}  // namespace toolwatch
