#pragma once

namespace dbose {

inline constexpr const char* kVersion = "deltabose 0.1.0";

}  // namespace dbose
