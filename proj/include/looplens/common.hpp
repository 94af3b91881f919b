#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace looplens {

// Thrown for problems with user-supplied data or configuration. The CLI maps
// this to exit code 2; anything else that escapes maps to exit code 1.
class input_error : public std::runtime_error {
public:
    explicit input_error(const std::string& msg) : std::runtime_error(msg) {}
};

using unix_time = std::int64_t;

} // namespace looplens
