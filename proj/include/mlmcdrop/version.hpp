#pragma once

namespace mlmcdrop {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mlmcdrop
