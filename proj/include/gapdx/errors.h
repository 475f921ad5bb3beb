/// @file errors.h
/// @brief Typed error hierarchy shared by all gapdx modules.
///
/// Every error carries a category that the CLI maps onto its exit code:
/// input errors exit 2, endpoint errors 3, protocol errors 4.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gapdx {

enum class ErrorCategory { kInput, kEndpoint, kProtocol };

class Error : public std::runtime_error {
 public:
  Error(std::string name, ErrorCategory category, const std::string& message)
      : std::runtime_error(message), name_(std::move(name)), category_(category) {}

  /// Stable machine-readable name, e.g. "ParseError".
  const std::string& name() const { return name_; }

  /// Throws a copy of this error, same dynamic type, with `context` prepended
  /// to the message.
  [[noreturn]] virtual void RethrowWithContext(const std::string& context) const {
    throw Error(name_, category_, context + ": " + what());
  }
  ErrorCategory category() const { return category_; }

 private:
  std::string name_;
  ErrorCategory category_;
};

#define GAPDX_DEFINE_ERROR(Type, Category)                        \
  class Type : public Error {                                     \
   public:                                                        \
    explicit Type(const std::string& message)                     \
        : Error(#Type, ErrorCategory::Category, message) {}       \
    [[noreturn]] void RethrowWithContext(const std::string& context) const override { \
      throw Type(context + ": " + what());                        \
    }                                                             \
  }

// action-core
GAPDX_DEFINE_ERROR(CoordinateSpaceError, kInput);
GAPDX_DEFINE_ERROR(InvalidCoordinate, kInput);
GAPDX_DEFINE_ERROR(InvalidAction, kInput);

// trace-io
GAPDX_DEFINE_ERROR(EmptyActionError, kInput);
GAPDX_DEFINE_ERROR(AmbiguousActionError, kInput);
GAPDX_DEFINE_ERROR(JoinError, kInput);
GAPDX_DEFINE_ERROR(DuplicateKeyError, kInput);
GAPDX_DEFINE_ERROR(IoError, kInput);
GAPDX_DEFINE_ERROR(ConfigError, kInput);
GAPDX_DEFINE_ERROR(ManifestTamperError, kInput);

// sampler
GAPDX_DEFINE_ERROR(InfeasibleTarget, kInput);
GAPDX_DEFINE_ERROR(InfeasibleDraw, kInput);

// diagnostics
GAPDX_DEFINE_ERROR(MissingVerdictError, kInput);
GAPDX_DEFINE_ERROR(EmptyRunError, kInput);
GAPDX_DEFINE_ERROR(MissingJudgmentError, kInput);

// gta-eval
GAPDX_DEFINE_ERROR(EndpointError, kEndpoint);
GAPDX_DEFINE_ERROR(TruncationError, kEndpoint);

// annotation protocol
GAPDX_DEFINE_ERROR(ProtocolError, kProtocol);
GAPDX_DEFINE_ERROR(NotFound, kProtocol);
GAPDX_DEFINE_ERROR(SequenceError, kProtocol);
GAPDX_DEFINE_ERROR(DuplicateAnnotation, kProtocol);

#undef GAPDX_DEFINE_ERROR

/// Malformed dialect output. `offset` is the byte offset of the failure
/// within the raw text (0 when not attributable to a position).
class ParseError : public Error {
 public:
  ParseError(std::string dialect, std::size_t offset, const std::string& detail)
      : Error("ParseError", ErrorCategory::kInput,
              dialect + " parse error at offset " + std::to_string(offset) + ": " + detail),
        dialect_(std::move(dialect)),
        offset_(offset),
        detail_(detail) {}

  const std::string& dialect() const { return dialect_; }
  std::size_t offset() const { return offset_; }

  [[noreturn]] void RethrowWithContext(const std::string& context) const override {
    throw ParseError(dialect_, offset_, context + ": " + detail_);
  }

 private:
  std::string dialect_;
  std::size_t offset_;
  std::string detail_;
};

class UnknownActionError : public Error {
 public:
  explicit UnknownActionError(std::string action_name, const std::string& context = "")
      : Error("UnknownActionError", ErrorCategory::kInput,
              (context.empty() ? "" : context + ": ") + "unknown action '" + action_name + "'"),
        action_name_(std::move(action_name)) {}

  const std::string& action_name() const { return action_name_; }

  [[noreturn]] void RethrowWithContext(const std::string& context) const override {
    throw UnknownActionError(action_name_, context);
  }

 private:
  std::string action_name_;
};

/// Raised by paired projection; lists every absent key, not just the first.
class MissingKeyError : public Error {
 public:
  explicit MissingKeyError(std::vector<std::string> missing)
      : Error("MissingKeyError", ErrorCategory::kInput, Describe(missing)),
        missing_(std::move(missing)) {}

  const std::vector<std::string>& missing() const { return missing_; }

 private:
  static std::string Describe(const std::vector<std::string>& missing) {
    std::string out = std::to_string(missing.size()) + " key(s) absent from target run:";
    for (const auto& key : missing) out += " " + key;
    return out;
  }

  std::vector<std::string> missing_;
};

}  // namespace gapdx
