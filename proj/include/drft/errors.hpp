#pragma once

#include <stdexcept>
#include <string>

namespace drft {

// Error taxonomy used across the library. All derive from std::runtime_error
// so callers may catch broadly; the CLI maps them to nonzero exit codes.

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error("contract error: " + msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error("format error: " + msg) {}
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error("parse error: " + msg) {}
};

struct VocabularyError : std::runtime_error {
    explicit VocabularyError(const std::string& msg)
        : std::runtime_error("vocabulary error: " + msg) {}
};

struct SamplingError : std::runtime_error {
    explicit SamplingError(const std::string& msg) : std::runtime_error("sampling error: " + msg) {}
};

struct DeterminismError : std::runtime_error {
    explicit DeterminismError(const std::string& msg)
        : std::runtime_error("determinism error: " + msg) {}
};

struct IncompatibilityError : std::runtime_error {
    explicit IncompatibilityError(const std::string& msg)
        : std::runtime_error("incompatibility error: " + msg) {}
};

}  // namespace drft
