#pragma once

#include <stdexcept>
#include <string>

namespace icl {

// Malformed input text (JSON, CSV, CLI arguments).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Well-formed input that violates a precondition (bad shapes, spectra, names).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// A verification run finished but an asserted bound did not hold.
class CheckFailed : public std::runtime_error {
 public:
  explicit CheckFailed(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace icl
