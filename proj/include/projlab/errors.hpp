#pragma once

#include <stdexcept>
#include <string>

namespace projlab {

// Error taxonomy shared across modules. Everything derives from
// std::runtime_error so callers can catch coarsely or precisely.

struct SingularMatrix : std::runtime_error {
    explicit SingularMatrix(const std::string& what) : std::runtime_error(what) {}
};

struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateDraw : std::runtime_error {
    explicit DegenerateDraw(const std::string& what) : std::runtime_error(what) {}
};

struct UnsupportedPattern : std::runtime_error {
    explicit UnsupportedPattern(const std::string& what) : std::runtime_error(what) {}
};

struct IndexError : std::runtime_error {
    explicit IndexError(const std::string& what) : std::runtime_error(what) {}
};

struct LengthMismatch : std::runtime_error {
    explicit LengthMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct SizeLimit : std::runtime_error {
    explicit SizeLimit(const std::string& what) : std::runtime_error(what) {}
};

struct MissingMean : std::runtime_error {
    explicit MissingMean(const std::string& what) : std::runtime_error(what) {}
};

struct NonConvergence : std::runtime_error {
    explicit NonConvergence(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace projlab
