#ifndef SKYLINE_ERROR_HPP_
#define SKYLINE_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace skyline {

// Every exception thrown by the library derives from `error`. The `kind()`
// string is stable and appears in the CLI's machine-readable error output.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

/// Malformed CSV input; carries the 1-based line number.
class parse_error : public error {
 public:
  parse_error(std::size_t line, const std::string& what)
      : error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }
  const char* kind() const noexcept override { return "parse_error"; }

 private:
  std::size_t line_;
};

class schema_error : public error {
 public:
  using error::error;
  const char* kind() const noexcept override { return "schema_error"; }
};

class empty_input_error : public error {
 public:
  using error::error;
  const char* kind() const noexcept override { return "empty_input_error"; }
};

class argument_error : public error {
 public:
  using error::error;
  const char* kind() const noexcept override { return "argument_error"; }
};

/// Not enough (or degenerate) data for the requested model.
class data_error : public error {
 public:
  using error::error;
  const char* kind() const noexcept override { return "data_error"; }
};

/// A value outside the support of a distribution.
class domain_error : public error {
 public:
  using error::error;
  const char* kind() const noexcept override { return "domain_error"; }
};

class lookup_error : public error {
 public:
  using error::error;
  const char* kind() const noexcept override { return "lookup_error"; }
};

/// A floor grid that misses too much conditional probability mass.
class coverage_error : public error {
 public:
  using error::error;
  const char* kind() const noexcept override { return "coverage_error"; }
};

class optimization_error : public error {
 public:
  using error::error;
  const char* kind() const noexcept override { return "optimization_error"; }
};

/// A model fit that did not converge after all restarts.
class fit_error : public optimization_error {
 public:
  using optimization_error::optimization_error;
  const char* kind() const noexcept override { return "fit_error"; }
};

class numeric_error : public error {
 public:
  using error::error;
  const char* kind() const noexcept override { return "numeric_error"; }
};

}  // namespace skyline

#endif  // SKYLINE_ERROR_HPP_
