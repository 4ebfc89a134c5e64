#pragma once

#include <exception>
#include <stdexcept>
#include <string>

namespace ecit {

// Process exit codes used by the command-line front-end.
enum class ExitCode : int {
  success = 0,
  config_error = 2,
  data_error = 3,
  numerical_error = 4,
};

// Base of every error thrown by the library. Each subclass maps to one exit
// code so the CLI can translate failures without string matching.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code)
      : std::runtime_error(what), code_(code) {}

  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what)
      : Error(what, ExitCode::config_error) {}
};

// Bad or unusable configuration (unknown method names, malformed config files).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(what, ExitCode::config_error) {}
};

// Malformed or degenerate input data.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what)
      : Error(what, ExitCode::data_error) {}
};

// Quadrature / root finding / linear algebra failed to deliver a result.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(what, ExitCode::numerical_error) {}
};

// Rethrows `error` with `context` prepended to its message, keeping the exit
// code (and, for library errors, the concrete class).
[[noreturn]] inline void rethrow_with_context(const std::exception_ptr& error,
                                              const std::string& context) {
  try {
    std::rethrow_exception(error);
  } catch (const DataError& e) {
    throw DataError(context + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(context + ": " + e.what());
  } catch (const DomainError& e) {
    throw DomainError(context + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(context + ": " + e.what());
  } catch (const Error& e) {
    throw Error(context + ": " + e.what(), e.code());
  } catch (const std::exception& e) {
    throw NumericalError(context + ": " + e.what());
  }
}

}  // namespace ecit
