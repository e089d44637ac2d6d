#pragma once

#include <string_view>

namespace esvt {

inline constexpr std::string_view kVersion = "esvt 0.1.0";

}  // namespace esvt
