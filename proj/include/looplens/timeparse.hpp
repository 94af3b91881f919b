#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "looplens/common.hpp"

namespace looplens::timeparse {

// Accepts "YYYY-MM-DDTHH:MM:SSZ" (UTC) or a plain integer of epoch seconds.
// Returns nullopt on anything else.
std::optional<unix_time> parse_timestamp(std::string_view s);

// Formats as ISO-8601 UTC with seconds resolution.
std::string format_iso8601(unix_time t);

} // namespace looplens::timeparse
