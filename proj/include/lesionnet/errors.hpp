#pragma once

#include <stdexcept>
#include <string>

namespace lesionnet {

/// Error type thrown by every module for contract violations, parse
/// failures and I/O problems. Messages carry a stable "<area>:" prefix
/// so callers can distinguish failure kinds.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
    if (!cond) {
        fail(msg);
    }
}

}  // namespace lesionnet
