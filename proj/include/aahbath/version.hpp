#pragma once

namespace aahbath {

inline constexpr const char* version = "1.0.0";

}  // namespace aahbath
