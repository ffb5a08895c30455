#pragma once

namespace ensemble_lab {

inline constexpr const char* library_version = "0.1.0";

}
