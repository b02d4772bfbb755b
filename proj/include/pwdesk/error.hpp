#ifndef PWDESK_ERROR_HPP
#define PWDESK_ERROR_HPP

#include <stdexcept>
#include <string>

namespace pwdesk {

// Error classes map onto the CLI exit codes: input problems exit 2,
// non-convergence exits 3, missing prerequisites exit 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidGeometry : Error {
  using Error::Error;
};

struct InputError : Error {
  using Error::Error;
};

struct ParseError : InputError {
  ParseError(const std::string& what, int line)
      : InputError(what + " (line " + std::to_string(line) + ")"), line(line) {}
  explicit ParseError(const std::string& what) : InputError(what), line(-1) {}
  int line;
};

struct ConvergenceError : Error {
  using Error::Error;
};

struct DependencyError : Error {
  using Error::Error;
};

struct InternalError : Error {
  using Error::Error;
};

} // namespace pwdesk

#endif
