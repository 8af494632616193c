#pragma once

#include <stdexcept>
#include <string>

namespace memscope {

// Base class for all failures raised by the framework.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised on syntax-level failures while reading a config document.
// Node-level problems do not throw; they are collected as diagnostics.
class ParseError : public Error {
 public:
  ParseError(int line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace memscope
