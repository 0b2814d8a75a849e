#pragma once

#include <stdexcept>
#include <string>

namespace spamdet {

// Base for every error raised by the library. The CLI maps the concrete
// subclass onto its exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violates a documented invariant (bad rating, dangling movie id, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A record file could not be parsed. Carries the 1-based line number.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// NaN/Inf appeared during training.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage needs an artifact that an earlier stage has not produced.
class MissingArtifactError : public Error {
 public:
  MissingArtifactError(const std::string& what, std::string stage)
      : Error(what), stage_(std::move(stage)) {}
  const std::string& required_stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace spamdet
