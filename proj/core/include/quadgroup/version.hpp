#pragma once

namespace quadgroup {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace quadgroup
