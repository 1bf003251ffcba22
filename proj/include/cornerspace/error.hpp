#pragma once

#include <stdexcept>
#include <string>

namespace cornerspace {

enum class ErrorCode {
  invalid_argument = 1,
  config = 2,
  numerical = 3,
  io = 4,
  resource = 5,
  not_converged = 6,
  internal = 7,
};

// Single exception type for the core library; the C API maps `code()` onto
// its status enum.
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

inline void require(bool cond, const std::string& what,
                    ErrorCode code = ErrorCode::invalid_argument) {
  if (!cond) throw Error(code, what);
}

}  // namespace cornerspace
