#pragma once

namespace docdisc {

inline constexpr const char* kVersionString = "0.1.0";
// Bumped whenever any on-disk record layout changes.
inline constexpr int kFormatVersion = 1;

}  // namespace docdisc
