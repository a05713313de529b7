#pragma once

namespace mixmort {

inline constexpr const char* kVersion = "0.1.0";

} // namespace mixmort
