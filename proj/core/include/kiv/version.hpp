#pragma once

namespace kiv {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace kiv
