#pragma once

#include <stdexcept>
#include <string>

namespace slipgait {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Inertia matrix condition number exceeded the configured bound.
struct SingularConfiguration : Error {
  using Error::Error;
};

/// J D^-1 J^T (or its slip-mode analogue) is numerically singular.
struct SingularContactMatrix : Error {
  using Error::Error;
};

/// The slip-mode force denominator J_z D^-1 (J_z - sigma*mu*J_x)^T is not
/// positive: the frictional equations of motion lose solvability.  Detected
/// and reported, never silently continued.
struct PainleveSingularity : Error {
  using Error::Error;
};

/// Neither slip sign yields a self-consistent slipping impact.
struct InconsistentSlipSign : Error {
  using Error::Error;
};

/// Two guard functions crossed inside one event-localization window and
/// priority resolution is disabled.
struct AmbiguousGuard : Error {
  using Error::Error;
};

/// Feedback-linearization decoupling matrix is singular.
struct SingularDecoupling : Error {
  using Error::Error;
};

/// Adaptive step-size control collapsed or the integrator diverged.
struct IntegrationFailure : Error {
  using Error::Error;
};

/// State left its claimed domain without a guard firing (guard logic bug).
struct DomainViolation : Error {
  using Error::Error;
};

/// The event passed to an impact-only operation is not an impact.
struct NotAnImpact : Error {
  using Error::Error;
};

/// Average forward speed is zero; cost of transport undefined.
struct ZeroSpeed : Error {
  using Error::Error;
};

/// Domain sequence is not a cycle of the transition graph.
struct InvalidSequence : Error {
  using Error::Error;
};

/// Configuration file missing, unparsable, or schema-invalid.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace slipgait
