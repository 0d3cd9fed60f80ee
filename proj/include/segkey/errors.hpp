#pragma once

#include <stdexcept>
#include <string>

namespace segkey {

// Base for every error raised by the library. The CLI maps each subclass to
// its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid size, shape or out-of-range argument.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated input file.
class ParseError : public Error {
 public:
  using Error::Error;
};

// A key was required but not supplied, or a key file is malformed.
class KeyError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch)
      : Error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

}  // namespace segkey
