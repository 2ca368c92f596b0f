#pragma once

#include <stdexcept>
#include <string>

namespace nlca {

// Failure categories surfaced by the library. Conditions that return partial
// results (iteration caps, non-finite simulation states) are reported through
// result flags instead and do not appear here.
enum class ErrorCode {
  invalid_argument,
  empty_box,
  degenerate_input,
  pwl_breakpoint,
  shape_mismatch,
  not_positive_definite,
  rank_deficient,
  diverged,
  io_error,
  format_error,
  insufficient_samples,
  inadmissible,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace nlca
