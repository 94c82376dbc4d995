#ifndef TZC_ERRORS_HPP
#define TZC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace tzc {

// All user-facing failures derive from Error so callers (CLI, bindings) can
// map them onto a stable exit-code / exception contract. `kind()` returns a
// short machine-readable tag; what() carries the human-readable diagnostic.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define TZC_DEFINE_ERROR(NAME)                                 \
  class NAME : public Error {                                  \
   public:                                                     \
    explicit NAME(const std::string& msg) : Error(#NAME, msg) {} \
  }

TZC_DEFINE_ERROR(SyntaxError);        // DSL / file-format parse failures
TZC_DEFINE_ERROR(ValidationError);    // structurally ill-formed compute op
TZC_DEFINE_ERROR(TypeError);          // dtype mismatches, implicit narrowing
TZC_DEFINE_ERROR(RuleError);          // ill-formed intrinsic operand rules
TZC_DEFINE_ERROR(UnknownIntrinsic);   // registry lookup miss
TZC_DEFINE_ERROR(ScheduleError);      // invalid transform sequence
TZC_DEFINE_ERROR(DivisibilityError);  // tiling factor does not divide extent
TZC_DEFINE_ERROR(PadUnsupported);     // zero padding would change results
TZC_DEFINE_ERROR(InjectError);        // pragma nest incompatible with intrinsic
TZC_DEFINE_ERROR(ShapeError);         // tensor value shape/dtype mismatch
TZC_DEFINE_ERROR(MissingInput);       // required input tensor absent
TZC_DEFINE_ERROR(NoFeasibleMapping);  // tuner found no loop mapping
TZC_DEFINE_ERROR(IoError);            // file read/write failures

#undef TZC_DEFINE_ERROR

// Internal invariant violation: indicates a bug in this library, not bad
// user input. Kept separate so tests can assert it is never thrown.
class InternalError : public std::logic_error {
 public:
  explicit InternalError(const std::string& msg)
      : std::logic_error("InternalError: " + msg) {}
};

inline void internal_check(bool cond, const std::string& msg) {
  if (!cond) throw InternalError(msg);
}

}  // namespace tzc

#endif  // TZC_ERRORS_HPP
