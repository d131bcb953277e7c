#pragma once

#include <stdexcept>
#include <string>

namespace glocal {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define GLOCAL_DEFINE_ERROR(Name)          \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  };

GLOCAL_DEFINE_ERROR(FormatError)
GLOCAL_DEFINE_ERROR(DataError)
GLOCAL_DEFINE_ERROR(IoError)
GLOCAL_DEFINE_ERROR(ShapeError)
GLOCAL_DEFINE_ERROR(EmptyError)
GLOCAL_DEFINE_ERROR(ParamError)
GLOCAL_DEFINE_ERROR(DegenerateError)
GLOCAL_DEFINE_ERROR(WalkError)
GLOCAL_DEFINE_ERROR(ConfigError)

#undef GLOCAL_DEFINE_ERROR

/// Iterative solver gave up; carries the last residual.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace glocal
