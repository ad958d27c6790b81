#pragma once

namespace odofuse {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace odofuse
