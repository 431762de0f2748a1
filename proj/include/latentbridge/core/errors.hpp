#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace latentbridge {

/// Base error; every message carries the module that raised it.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error("[" + module + "] " + message), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

/// Caller supplied something with the wrong shape, size or content.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A persisted file does not match its binary layout.
class FormatError : public Error {
 public:
  FormatError(std::string module, const std::string& message, std::uint64_t offset)
      : Error(std::move(module), message + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// NaN/inf or a degenerate quantity (zero-norm vector) appeared.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Missing or inconsistent configuration (unknown backend, missing bank, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace latentbridge
