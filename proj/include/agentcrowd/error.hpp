#pragma once

#include <stdexcept>
#include <string>

namespace agentcrowd {

// Base of every library error. `kind()` is the stable name used in
// machine-readable error reports.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

// Bad input data or configuration (CLI exit code 1).
class ValidationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "ValidationError"; }
};

// Model backend unreachable or refusing service (CLI exit code 2).
class BackendError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "BackendError"; }
};

#define AGENTCROWD_ERROR(Name, Base)                                    \
  class Name : public Base {                                            \
   public:                                                              \
    using Base::Base;                                                   \
    const char* kind() const noexcept override { return #Name; }        \
  }

// corpus
AGENTCROWD_ERROR(ParseError, ValidationError);
AGENTCROWD_ERROR(SchemaError, ValidationError);
AGENTCROWD_ERROR(DuplicateIdError, ValidationError);
AGENTCROWD_ERROR(UnknownTopicError, ValidationError);

// crowd
AGENTCROWD_ERROR(InfeasibleSpecError, ValidationError);
AGENTCROWD_ERROR(EmptySpecError, ValidationError);
AGENTCROWD_ERROR(InfeasibleDesignError, ValidationError);
AGENTCROWD_ERROR(DegenerateDesignError, ValidationError);
AGENTCROWD_ERROR(EmptyCrowdError, ValidationError);

// prompts
AGENTCROWD_ERROR(MissingFieldError, ValidationError);
AGENTCROWD_ERROR(NoEvidenceError, ValidationError);
AGENTCROWD_ERROR(EmptyTextError, ValidationError);
AGENTCROWD_ERROR(JsonError, ValidationError);
AGENTCROWD_ERROR(UnknownUrlError, ValidationError);
AGENTCROWD_ERROR(RangeError, ValidationError);

// backend
AGENTCROWD_ERROR(TransportError, BackendError);
AGENTCROWD_ERROR(AuthError, BackendError);
AGENTCROWD_ERROR(TimeoutError, BackendError);

// runner
AGENTCROWD_ERROR(ConfigError, ValidationError);
AGENTCROWD_ERROR(DigestMismatchError, ValidationError);
AGENTCROWD_ERROR(CorruptLogError, ValidationError);

// metrics
AGENTCROWD_ERROR(EmptyError, ValidationError);
AGENTCROWD_ERROR(LengthMismatchError, ValidationError);
AGENTCROWD_ERROR(DegenerateError, ValidationError);
AGENTCROWD_ERROR(TooFewClaimsError, ValidationError);
AGENTCROWD_ERROR(EmptySampleError, ValidationError);
AGENTCROWD_ERROR(EmptyGroupError, ValidationError);
AGENTCROWD_ERROR(UnknownKeyError, ValidationError);
AGENTCROWD_ERROR(UnresolvedClaimError, ValidationError);
AGENTCROWD_ERROR(MissingGroundTruthError, ValidationError);
AGENTCROWD_ERROR(MissingInputError, ValidationError);

#undef AGENTCROWD_ERROR

}  // namespace agentcrowd
