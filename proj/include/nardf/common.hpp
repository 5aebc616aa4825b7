#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nardf {

// ============================================================================
// Tolerances and capacity caps
// ============================================================================

// Probability rows must normalize to 1 within this bound.
inline constexpr double kProbTol = 1e-12;

// Derived quantities (marginals, rates, covariances) are trusted to this bound.
inline constexpr double kDerivedTol = 1e-9;

// Reproduction-history trees grow as |Y|^n; hard caps with explicit errors.
inline constexpr int kMaxPolicyHorizon = 6;
inline constexpr int kMaxReproductionAlphabet = 8;

// Exact enumeration of the joint law touches |X|^(n+1) * |Y|^(n+1) cells.
inline constexpr std::size_t kMaxJointCells = std::size_t{1} << 24;

inline constexpr double kLn2 = 0.6931471805599453094;

inline double nats_to_bits(double nats) { return nats / kLn2; }

// ============================================================================
// Error types
// ============================================================================

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Dimensionally inconsistent inputs; message names the offending pair.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Instance exceeds the history-tree or joint-law caps.
class CapacityError : public Error {
public:
    using Error::Error;
};

// Requested distortion level outside the feasible range.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

// A tilt normalizer vanished; message names the history.
class DegenerateSupportError : public Error {
public:
    using Error::Error;
};

// Numerical failure (singular matrix, non-convergence where fatal).
class NumericalError : public Error {
public:
    using Error::Error;
};

// Configuration / file parsing problems.
class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace nardf
