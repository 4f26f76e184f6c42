#pragma once

#include <stdexcept>
#include <string>

namespace parapost {

// Invalid user-supplied value (non-positive noise level, theta <= 0, ...).
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Coefficient field violates parabolicity or mesh assumptions.
struct AssemblyError : std::runtime_error {
    explicit AssemblyError(const std::string& msg) : std::runtime_error(msg) {}
};

// Linear system solve failed (zero pivot).
struct SolveError : std::runtime_error {
    explicit SolveError(const std::string& msg) : std::runtime_error(msg) {}
};

// A matrix that must be positive definite was not.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct BracketError : std::runtime_error {
    explicit BracketError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CurvatureError : std::runtime_error {
    explicit CurvatureError(const std::string& msg) : std::runtime_error(msg) {}
};

struct GridError : std::runtime_error {
    explicit GridError(const std::string& msg) : std::runtime_error(msg) {}
};

struct QuadratureError : std::runtime_error {
    explicit QuadratureError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SetupError : std::runtime_error {
    explicit SetupError(const std::string& msg) : std::runtime_error(msg) {}
};

struct EigError : std::runtime_error {
    explicit EigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SampleCountError : std::runtime_error {
    explicit SampleCountError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CovarianceError : std::runtime_error {
    explicit CovarianceError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ReferenceError : std::runtime_error {
    explicit ReferenceError(const std::string& msg) : std::runtime_error(msg) {}
};

struct AlignmentError : std::runtime_error {
    explicit AlignmentError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace parapost
