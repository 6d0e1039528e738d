#pragma once

#include <stdexcept>
#include <string>

namespace holo {

// All contract violations surface as an Error carrying a short machine
// readable code ("BadMagic", "ZeroBackground", ...). Validation errors map
// to CLI exit code 1, runtime errors to 2.
class Error : public std::runtime_error {
public:
    enum class Kind { Validation, Runtime };

    Error(std::string code, const std::string& msg, Kind kind = Kind::Validation)
        : std::runtime_error(code + ": " + msg), code_(std::move(code)), kind_(kind) {}

    const std::string& code() const { return code_; }
    Kind kind() const { return kind_; }

private:
    std::string code_;
    Kind kind_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& msg) {
    throw Error(code, msg, Error::Kind::Validation);
}

[[noreturn]] inline void fail_runtime(const std::string& code, const std::string& msg) {
    throw Error(code, msg, Error::Kind::Runtime);
}

inline void require(bool cond, const std::string& code, const std::string& msg) {
    if (!cond) fail(code, msg);
}

}  // namespace holo
