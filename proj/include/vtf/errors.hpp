#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace vtf {

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct OrderError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TessellationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConstructionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double kkt_residual, int iterations)
        : std::runtime_error(what), kkt_residual_(kkt_residual), iterations_(iterations) {}
    double kkt_residual() const { return kkt_residual_; }
    int iterations() const { return iterations_; }

private:
    double kkt_residual_;
    int iterations_;
};

// Raised when a constructed certificate violates one of its defining conditions.
class CertificationError : public std::runtime_error {
public:
    CertificationError(const std::string& what, std::vector<std::vector<std::size_t>> offenders)
        : std::runtime_error(what), offenders_(std::move(offenders)) {}
    const std::vector<std::vector<std::size_t>>& offenders() const { return offenders_; }

private:
    std::vector<std::vector<std::size_t>> offenders_;
};

}  // namespace vtf
