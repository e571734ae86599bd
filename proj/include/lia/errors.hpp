#pragma once

#include <stdexcept>
#include <string>

namespace lia {

// Usage/config/parse problems exit 2 at the CLI; runtime failures exit 1.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct parse_error : config_error {
    parse_error(const std::string& msg, int line = 0)
        : config_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_no(line) {}
    int line_no;
};

struct eval_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// 2^k world enumerations fail loudly instead of grinding.
struct cap_exceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct search_cap_exceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct snapshot_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace lia
