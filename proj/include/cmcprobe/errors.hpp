#pragma once

#include <stdexcept>
#include <string>

namespace cmcprobe {

// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Evaluation point inside the excluded ball of a metric model.
class DomainError : public Error {
public:
    DomainError(const std::string& what, double radius)
        : Error(what), radius_(radius) {}
    double radius() const noexcept { return radius_; }

private:
    double radius_;
};

// Quadrature grid cannot resolve the requested harmonic degree.
class CapacityError : public Error {
public:
    using Error::Error;
};

// Graph violates the embedding invariant (C1 proxy norm too large, bad scale, ...).
class EmbeddingError : public Error {
public:
    using Error::Error;
};

// Degenerate induced metric at a node.
class GeometryError : public Error {
public:
    GeometryError(const std::string& what, int node) : Error(what), node_(node) {}
    int node() const noexcept { return node_; }

private:
    int node_;
};

// Operation called outside its documented precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

// Moment normalization fixed-point iteration failed to contract.
class NormalizationError : public Error {
public:
    NormalizationError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

// Degenerate least-squares fit (zero quadratic form, too few points, noise floor).
class FitError : public Error {
public:
    using Error::Error;
};

// Invalid harness configuration; `field` names the offending key.
class ConfigError : public Error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : Error(field + ": " + what), field_(field) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace cmcprobe
