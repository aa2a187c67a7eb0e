#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lbc {

enum class ErrorKind {
  config,
  schema,
  parse,
  type,
  value,
  fit,
  render,
  order,
  contract,
  backend,
  eval,
  stat,
  io,
};

std::string_view to_string(ErrorKind kind);

/// Domain error raised by every module. Carries the module and stage that
/// produced it so the CLI can report where a pipeline failed.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, std::string stage, const std::string& message)
      : std::runtime_error(message),
        kind_(kind),
        module_(std::move(module)),
        stage_(std::move(stage)) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
  [[nodiscard]] const std::string& module() const noexcept { return module_; }
  [[nodiscard]] const std::string& stage() const noexcept { return stage_; }

  /// "module/stage: message"
  [[nodiscard]] std::string describe() const;

 private:
  ErrorKind kind_;
  std::string module_;
  std::string stage_;
};

/// Transport failure talking to a remote backend. `attempts` is how many
/// requests were issued before giving up.
class BackendError : public Error {
 public:
  BackendError(std::string stage, const std::string& message, int attempts)
      : Error(ErrorKind::backend, "llm_backend", std::move(stage), message), attempts_(attempts) {}

  [[nodiscard]] int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

}  // namespace lbc
