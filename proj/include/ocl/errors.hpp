#pragma once

#include <stdexcept>
#include <string>

namespace ocl {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error { public: using Error::Error; };
class InvalidField : public Error { public: using Error::Error; };
class ShapeError : public Error { public: using Error::Error; };
class ConfigurationError : public Error { public: using Error::Error; };
class ValidationError : public Error { public: using Error::Error; };
class DegenerateDatum : public Error { public: using Error::Error; };
class DegenerateSeed : public Error { public: using Error::Error; };
class SamplingError : public Error { public: using Error::Error; };
class InternalInvariantError : public Error { public: using Error::Error; };

/// Raised when the reaction stage cannot be solved with the current step
/// (dt * lambda >= 1, or no multiplier fixed point exists).  Callers retry
/// with a smaller step.
class StiffnessError : public Error { public: using Error::Error; };

/// Mass escaped through the truncated boundary beyond the permitted budget.
class BoundaryLeakError : public Error { public: using Error::Error; };

/// A persisted file no longer matches the hash recorded in its manifest.
class HashMismatch : public Error { public: using Error::Error; };

} // namespace ocl
