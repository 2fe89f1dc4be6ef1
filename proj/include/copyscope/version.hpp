#pragma once

namespace copyscope {
inline constexpr const char* kVersion = "0.1.0";
}
