#pragma once

namespace bnnprobe {

inline constexpr const char* version = "1.0.0";

}  // namespace bnnprobe
