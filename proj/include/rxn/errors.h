// Error types shared across the rxnparse libraries.
//
// Every failure the library reports is an exception derived from rxn::Error.
// The class name doubles as the "error class" recorded in run manifests.

#ifndef RXN_ERRORS_H_
#define RXN_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rxn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

#define RXN_DEFINE_ERROR(Name)                                        \
  class Name : public Error {                                         \
   public:                                                            \
    using Error::Error;                                               \
    const char* kind() const noexcept override { return #Name; }      \
  }

// chem
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, const std::string& reason)
      : Error("SMILES syntax error at position " + std::to_string(position) +
              ": " + reason),
        position_(position),
        reason_(reason) {}

  const char* kind() const noexcept override { return "SyntaxError"; }
  std::size_t position() const noexcept { return position_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t position_;
  std::string reason_;
};

RXN_DEFINE_ERROR(ValenceError);
RXN_DEFINE_ERROR(WidthMismatch);

// geometry
RXN_DEFINE_ERROR(GeometryError);

// perception-io
class SchemaError : public Error {
 public:
  SchemaError(const std::string& pointer, const std::string& reason)
      : Error("schema error at " + (pointer.empty() ? std::string("/") : pointer) +
              ": " + reason),
        pointer_(pointer) {}
  const char* kind() const noexcept override { return "SchemaError"; }
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

RXN_DEFINE_ERROR(PayloadError);
RXN_DEFINE_ERROR(PreconditionError);
RXN_DEFINE_ERROR(BackendUnavailable);
RXN_DEFINE_ERROR(FixtureMissing);
RXN_DEFINE_ERROR(ResponseFormatError);
RXN_DEFINE_ERROR(ConstraintError);
RXN_DEFINE_ERROR(ResolutionError);

// planner
RXN_DEFINE_ERROR(PlanParseError);

// reasoning
RXN_DEFINE_ERROR(ConfigError);
RXN_DEFINE_ERROR(WeightError);

// eval
RXN_DEFINE_ERROR(AlignmentError);

// cli-pipeline
RXN_DEFINE_ERROR(ReferenceError);

#undef RXN_DEFINE_ERROR

}  // namespace rxn

#endif  // RXN_ERRORS_H_
