#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bsre {

enum class ErrorKind {
    InvalidConfiguration,
    Domain,
    ContractViolation,
    BoundViolation,
    BallViolation,
    NonConvergence,
    OracleFailure,
};

std::string_view to_string(ErrorKind kind);

/// Base of every error raised by the library. The kind drives the CLI exit
/// status, so callers rarely need the concrete subclass.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class InvalidConfiguration : public Error {
public:
    explicit InvalidConfiguration(const std::string& m) : Error(ErrorKind::InvalidConfiguration, m) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& m) : Error(ErrorKind::Domain, m) {}
};

class ContractViolation : public Error {
public:
    explicit ContractViolation(const std::string& m) : Error(ErrorKind::ContractViolation, m) {}
};

class BoundViolation : public Error {
public:
    explicit BoundViolation(const std::string& m) : Error(ErrorKind::BoundViolation, m) {}
};

class BallViolation : public Error {
public:
    explicit BallViolation(const std::string& m) : Error(ErrorKind::BallViolation, m) {}
};

class OracleFailure : public Error {
public:
    explicit OracleFailure(const std::string& m) : Error(ErrorKind::OracleFailure, m) {}
};

/// Fixed-point iteration gave up; carries the residual sequence of the
/// window that failed.
class NonConvergence : public Error {
public:
    NonConvergence(const std::string& m, std::vector<double> residuals)
        : Error(ErrorKind::NonConvergence, m), residuals_(std::move(residuals)) {}

    const std::vector<double>& residuals() const noexcept { return residuals_; }

private:
    std::vector<double> residuals_;
};

}  // namespace bsre
