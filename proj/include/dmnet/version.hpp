#pragma once

namespace dmnet {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dmnet
