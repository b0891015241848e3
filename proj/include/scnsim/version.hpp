#pragma once

namespace scnsim {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace scnsim
