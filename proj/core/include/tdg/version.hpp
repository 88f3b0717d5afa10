#pragma once

namespace tdg {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tdg
