#pragma once

#include <stdexcept>
#include <string>

namespace fieldfuse {

enum class ErrorCode {
  kInvalidArgument = 1,
  kParse,
  kIo,
  kNotEnoughPoses,
  kDegenerateGeometry,
  kContractViolation,
  kBackendFailure,
};

const char* to_string(ErrorCode code);

/// Every failure the library reports is an Error carrying a code that the C
/// layer maps one-to-one onto its status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace fieldfuse
