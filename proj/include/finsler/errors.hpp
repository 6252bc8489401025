#pragma once

// Error taxonomy for the engine.  Every failure mode that callers can act on
// gets its own type; all inherit from Error so the CLI can map them to exit
// codes in one place (config errors -> 2, domain/numeric errors -> 3).

#include <stdexcept>
#include <string>

namespace finsler {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// ---- configuration / input errors -----------------------------------------

struct ConfigError : Error {
    using Error::Error;
};

// Parse failure.  `position` is a 1-based byte offset into the source text,
// `expected` names the token class the parser wanted to see there.
struct SyntaxError : Error {
    std::size_t position;
    std::string expected;
    SyntaxError(std::size_t pos, std::string expect)
        : Error("syntax error at position " + std::to_string(pos) +
                ": expected " + expect),
          position(pos), expected(std::move(expect)) {}
};

struct UnknownIdentifier : Error {
    std::string name;
    std::size_t position;
    UnknownIdentifier(std::string ident, std::size_t pos)
        : Error("unknown identifier '" + ident + "' at position " +
                std::to_string(pos)),
          name(std::move(ident)), position(pos) {}
};

// Variable index outside 1..n for the declared dimension.
struct IndexOutOfRange : Error {
    std::string name;
    IndexOutOfRange(std::string ident, int dim)
        : Error("variable '" + ident + "' out of range for dimension " +
                std::to_string(dim)),
          name(std::move(ident)) {}
};

// Vector field components must not mention fiber variables.
struct YVariableInVectorField : Error {
    std::string name;
    explicit YVariableInVectorField(std::string ident)
        : Error("vector field component references fiber variable '" + ident +
                "'"),
          name(std::move(ident)) {}
};

// ---- domain / numeric errors ----------------------------------------------

struct DomainError : Error {
    using Error::Error;
};

struct GuardViolation : DomainError {
    double guard_value;
    explicit GuardViolation(double v)
        : DomainError("domain guard non-positive (value " + std::to_string(v) +
                      ")"),
          guard_value(v) {}
};

struct NotPositiveDefinite : DomainError {
    double min_eigenvalue;
    explicit NotPositiveDefinite(double ev)
        : DomainError("fundamental tensor not positive definite "
                      "(smallest eigenvalue " + std::to_string(ev) + ")"),
          min_eigenvalue(ev) {}
};

struct DegenerateFlag : DomainError {
    explicit DegenerateFlag(const std::string& msg) : DomainError(msg) {}
};

struct OrderOutOfSpec : Error {
    explicit OrderOutOfSpec(const std::string& msg) : Error(msg) {}
};

struct TruncationOrderExceeded : Error {
    explicit TruncationOrderExceeded(const std::string& msg) : Error(msg) {}
};

struct StencilLeavesDomain : DomainError {
    explicit StencilLeavesDomain(const std::string& msg) : DomainError(msg) {}
};

struct QuadratureNotConverged : DomainError {
    double estimate;
    explicit QuadratureNotConverged(double est)
        : DomainError("indicatrix quadrature error estimate " +
                      std::to_string(est) + " above tolerance"),
          estimate(est) {}
};

// Mean Cartan torsion vanishes: the isotropic mean-Landsberg fit is undefined.
struct MeanCartanVanishes : DomainError {
    explicit MeanCartanVanishes(const std::string& msg) : DomainError(msg) {}
};

struct LeftDomain : DomainError {
    double time;  // bisected boundary crossing time
    explicit LeftDomain(double t)
        : DomainError("trajectory left the chart domain at t = " +
                      std::to_string(t)),
          time(t) {}
};

struct FlowLeftDomain : DomainError {
    explicit FlowLeftDomain(const std::string& msg) : DomainError(msg) {}
};

struct StepUnderflow : DomainError {
    explicit StepUnderflow(const std::string& msg) : DomainError(msg) {}
};

struct ExtrapolationDiverged : DomainError {
    explicit ExtrapolationDiverged(const std::string& msg) : DomainError(msg) {}
};

struct InsufficientSamples : ConfigError {
    explicit InsufficientSamples(const std::string& msg) : ConfigError(msg) {}
};

struct InvalidParameter : ConfigError {
    explicit InvalidParameter(const std::string& msg) : ConfigError(msg) {}
};

struct NotProjective : DomainError {
    double residual;
    explicit NotProjective(double r)
        : DomainError("vector field is not projective (spray residual " +
                      std::to_string(r) + ")"),
          residual(r) {}
};

struct NotIInvariant : DomainError {
    double residual;
    explicit NotIInvariant(double r)
        : DomainError("vector field does not preserve the mean Cartan form "
                      "(residual " + std::to_string(r) + ")"),
          residual(r) {}
};

// Internal cross-check failed (e.g. a passed implication that must hold by
// construction did not).  Always a bug, never a data problem.
struct EngineError : Error {
    using Error::Error;
};

}  // namespace finsler
