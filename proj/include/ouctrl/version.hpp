#pragma once

namespace ouctrl {

inline constexpr const char* kToolVersion = "0.1.0";

} // namespace ouctrl
