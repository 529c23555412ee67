#pragma once

#include <stdexcept>
#include <string>

namespace ctxseg {

// Bad input data: unreadable files, malformed manifests, label values out of
// range. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// A broken internal invariant. Maps to CLI exit code 3.
class InternalError : public std::logic_error {
public:
    explicit InternalError(const std::string& msg) : std::logic_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw DataError(msg);
}

inline void check_invariant(bool cond, const std::string& msg) {
    if (!cond) throw InternalError(msg);
}

}  // namespace ctxseg
