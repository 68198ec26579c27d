#pragma once

#include <stdexcept>
#include <string>

namespace cvf {

// Failure categories. Values 2..5 double as CLI exit codes; 1 covers I/O and
// anything unclassified.
enum class status_code : int {
    ok = 0,
    failure = 1,
    config = 2,
    capacity = 3,
    cyclic = 4,
    numeric = 5,
};

class error : public std::runtime_error {
  public:
    error(status_code code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    status_code code() const noexcept { return code_; }

  private:
    status_code code_;
};

[[noreturn]] inline void fail(status_code code, const std::string& what) {
    throw error(code, what);
}

inline const char* status_name(status_code code) {
    switch (code) {
        case status_code::ok: return "ok";
        case status_code::failure: return "failure";
        case status_code::config: return "config";
        case status_code::capacity: return "capacity";
        case status_code::cyclic: return "cyclic-outside-invariant";
        case status_code::numeric: return "numeric";
    }
    return "unknown";
}

} // namespace cvf
