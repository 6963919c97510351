#pragma once

namespace levyflow {
inline constexpr const char* version = "0.1.0";
}
