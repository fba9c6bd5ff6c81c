#pragma once

#include <string>

namespace potmde {

/// Shortest round-trip decimal form of a double; "inf", "-inf", "nan" for non-finite.
std::string fmt_num(double v);

}  // namespace potmde
