#pragma once

namespace potmde {

/// Serial is the reference path; Parallel must reproduce it bit for bit.
enum class Execution { Serial, Parallel };

}  // namespace potmde
