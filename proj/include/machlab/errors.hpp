#pragma once

#include <stdexcept>
#include <string>

namespace machlab {

enum class ErrorKind {
  config,
  parameter,
  geometry,
  solver,
  blowup,
  data,
  stack,
  norm,
  alignment,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config error";
    case ErrorKind::parameter: return "parameter error";
    case ErrorKind::geometry: return "geometry error";
    case ErrorKind::solver: return "solver error";
    case ErrorKind::blowup: return "blow-up error";
    case ErrorKind::data: return "data error";
    case ErrorKind::stack: return "stack error";
    case ErrorKind::norm: return "norm error";
    case ErrorKind::alignment: return "alignment error";
  }
  return "error";
}

/// Every failure raised by the library carries a kind so the CLI can map it
/// onto an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace machlab
