#pragma once

// Snapshot files for one-shot assessment: header `variable,value`, one row
// per variable, booleans as true/false. A `timestamp` row sets the time.

#include <string>
#include <string_view>

#include "klafate/ruledsl.hpp"

namespace klafate::rules {

std::string snapshot_to_csv(const Snapshot& s);
Snapshot snapshot_from_csv(std::string_view text);

} // namespace klafate::rules
