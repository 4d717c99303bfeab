#ifndef SINGTRACE_ERROR_H_
#define SINGTRACE_ERROR_H_

#include <stdexcept>
#include <string>

namespace singtrace {

// Raised when an argument violates an operation's precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised for malformed or unsupported files and blobs.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when an iterative computation produces non-finite state.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised for missing catalog entries (singers, songs, traces, steps).
class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when an entry already exists or an identical job is in flight.
class Conflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace singtrace

#endif  // SINGTRACE_ERROR_H_
