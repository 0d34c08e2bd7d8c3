#pragma once

namespace rsid {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rsid
