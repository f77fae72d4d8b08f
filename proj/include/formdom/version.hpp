#pragma once

namespace formdom {

inline constexpr const char* kVersion = "0.1.0";

} // namespace formdom
