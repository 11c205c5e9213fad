#pragma once

#include <stdexcept>
#include <string>

namespace skitb {

/// Failure categories shared by the C++ core and the C API status codes.
enum class ErrorCode {
    InvalidArgument = 1,
    Parse = 2,
    Invariant = 3,
    NoInit = 4,
    Backend = 5,
    Protocol = 6,
    Io = 7,
    Config = 8,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace skitb
