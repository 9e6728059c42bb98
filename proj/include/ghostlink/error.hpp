#pragma once

#include <stdexcept>
#include <string>

namespace ghostlink {

/// Base class for every error raised by the library. The CLI maps these to a
/// structured message on stderr and a nonzero exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace ghostlink
