#pragma once

#include <stdexcept>
#include <string>

namespace chsim {

/// Coarse classification of failures, used by callers (notably the CLI)
/// to map an exception onto a process exit code.
enum class ErrorKind {
    validation,       // bad input: wrong dims, broken invariants, schema mismatch
    capacity,         // configured size bound exceeded
    numeric,          // convergence failure or ambiguous numerics
    incompatibility,  // noncommuting operands where commuting ones are required
    consistency,      // a history family whose decoherence conditions fail
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& m) : Error(ErrorKind::validation, m) {}
};

struct CapacityError : Error {
    explicit CapacityError(const std::string& m) : Error(ErrorKind::capacity, m) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& m) : Error(ErrorKind::numeric, m) {}
};

/// Two eigenvalues sit in the band between numerical noise and an intended
/// degeneracy; grouping them either way would be a silent guess.
class AmbiguousSpectrumError : public NumericError {
public:
    AmbiguousSpectrumError(const std::string& m, double gap)
        : NumericError(m), gap_(gap) {}

    double gap() const noexcept { return gap_; }

private:
    double gap_;
};

struct IncompatibilityError : Error {
    explicit IncompatibilityError(const std::string& m) : Error(ErrorKind::incompatibility, m) {}
};

struct ConsistencyError : Error {
    explicit ConsistencyError(const std::string& m) : Error(ErrorKind::consistency, m) {}
};

/// Valid types fed into an operation whose result would be undefined there
/// (zero vectors as properties, conditioning on probability-zero events).
struct DegenerateInputError : ValidationError {
    explicit DegenerateInputError(const std::string& m) : ValidationError(m) {}
};

}  // namespace chsim
