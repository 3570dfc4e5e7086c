#pragma once

namespace symspin {

inline constexpr const char* library_version = "1.0.0";

}
