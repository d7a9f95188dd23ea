#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparsesplat {

// Base of every error thrown by the library. category() is the short
// machine-readable tag the CLI prints as `error:<category>:`.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& message) : Error("argument", message) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& message) : Error("numeric", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

// Malformed file content. offset is the byte position where parsing failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::uint64_t offset)
      : Error("parse", message + " (at byte " + std::to_string(offset) + ")"), reason_(message), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }
  // The message without the offset suffix.
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string reason_;
  std::uint64_t offset_;
};

// A bundle or view set failed validation; every violation found is listed.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error("validation", join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& item : items) {
      if (!out.empty()) out += "; ";
      out += item;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

}  // namespace sparsesplat
