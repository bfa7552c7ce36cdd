#pragma once

#include <string_view>

namespace epimob {

inline constexpr std::string_view kVersion = "0.1.0";

}  // namespace epimob
