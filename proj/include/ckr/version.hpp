#pragma once

namespace ckr {

inline constexpr const char* kVersion = "0.1.0";

} // namespace ckr
