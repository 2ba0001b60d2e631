#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace iontrap {

/// Base class of every error raised by the toolkit. `kind()` is a stable,
/// machine-readable tag used by the CLI when it reports failures as JSON.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
  [[nodiscard]] virtual std::string_view kind() const noexcept { return "error"; }
};

class ConfigError : public Error {
public:
  ConfigError(std::string key, const std::string& what)
      : Error(key + ": " + what), key_(std::move(key)) {}
  [[nodiscard]] std::string_view kind() const noexcept override { return "config"; }
  [[nodiscard]] const std::string& key() const noexcept { return key_; }

private:
  std::string key_;
};

class StabilityError : public Error {
public:
  using Error::Error;
  [[nodiscard]] std::string_view kind() const noexcept override { return "stability"; }
};

class CapacityError : public Error {
public:
  using Error::Error;
  [[nodiscard]] std::string_view kind() const noexcept override { return "capacity"; }
};

class OrderingError : public Error {
public:
  using Error::Error;
  [[nodiscard]] std::string_view kind() const noexcept override { return "ordering"; }
};

class FormatError : public Error {
public:
  using Error::Error;
  [[nodiscard]] std::string_view kind() const noexcept override { return "format"; }
};

class IoError : public Error {
public:
  using Error::Error;
  [[nodiscard]] std::string_view kind() const noexcept override { return "io"; }
};

class PreconditionError : public Error {
public:
  using Error::Error;
  [[nodiscard]] std::string_view kind() const noexcept override { return "precondition"; }
};

/// Raised when an iterative fit fails; carries the last iterate so callers
/// can inspect how far it got.
class FitError : public Error {
public:
  FitError(const std::string& what, std::vector<double> last_iterate)
      : Error(what), last_iterate_(std::move(last_iterate)) {}
  [[nodiscard]] std::string_view kind() const noexcept override { return "fit"; }
  [[nodiscard]] const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }

private:
  std::vector<double> last_iterate_;
};

class NoOscillationError : public Error {
public:
  using Error::Error;
  [[nodiscard]] std::string_view kind() const noexcept override { return "no_oscillation"; }
};

class AmbiguityError : public Error {
public:
  AmbiguityError(const std::string& what, double required_accuracy_hz)
      : Error(what), required_accuracy_hz_(required_accuracy_hz) {}
  [[nodiscard]] std::string_view kind() const noexcept override { return "ambiguity"; }
  [[nodiscard]] double required_accuracy_hz() const noexcept { return required_accuracy_hz_; }

private:
  double required_accuracy_hz_;
};

/// Required input files are absent; carries their names.
class MissingInputError : public Error {
public:
  MissingInputError(const std::string& what, std::vector<std::string> missing)
      : Error(what), missing_(std::move(missing)) {}
  [[nodiscard]] std::string_view kind() const noexcept override { return "missing_input"; }
  [[nodiscard]] const std::vector<std::string>& missing() const noexcept { return missing_; }

private:
  std::vector<std::string> missing_;
};

}  // namespace iontrap
