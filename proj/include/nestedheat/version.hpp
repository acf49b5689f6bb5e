#pragma once

namespace nh {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace nh
