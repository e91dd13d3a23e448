#pragma once

#include <stdexcept>
#include <string>

namespace radif {

// Error class mirrors the process exit scheme: validation errors (bad
// input, bad config) vs runtime errors (I/O, numeric divergence).
enum class Errc : int {
    validation = 1,
    runtime = 2,
};

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}

    Errc code() const { return code_; }

    static Error validation(const std::string& msg) { return Error(Errc::validation, msg); }
    static Error runtime(const std::string& msg) { return Error(Errc::runtime, msg); }

private:
    Errc code_;
};

} // namespace radif
