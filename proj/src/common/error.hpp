#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace modeladapt {

enum class ErrorCode {
  parse,
  model,
  resolution,
  plan,
  constraint,
  rights,
  not_found,
  io,
  invalid_argument,
  unauthorized,
};

const char* error_code_name(ErrorCode code) noexcept;

/// Base class for every error raised by the engine. `location` names the
/// model element or input position the error refers to, when known.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string location = {})
      : std::runtime_error(message), code_(code), location_(std::move(location)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& location() const noexcept { return location_; }

 private:
  ErrorCode code_;
  std::string location_;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& message, std::string location = {})
      : Error(ErrorCode::parse, message, std::move(location)) {}
};

class ModelError : public Error {
 public:
  explicit ModelError(const std::string& message, std::string location = {})
      : Error(ErrorCode::model, message, std::move(location)) {}
};

/// A source or annotation reference that cannot be resolved. `policy_hidden`
/// marks references to elements that exist but are hidden from the client.
class ResolutionError : public Error {
 public:
  explicit ResolutionError(const std::string& message, std::string location = {}, bool policy_hidden = false)
      : Error(ErrorCode::resolution, message, std::move(location)), policy_hidden_(policy_hidden) {}

  bool policy_hidden() const noexcept { return policy_hidden_; }

 private:
  bool policy_hidden_;
};

class PlanError : public Error {
 public:
  explicit PlanError(const std::string& message, std::string location = {})
      : Error(ErrorCode::plan, message, std::move(location)) {}
};

/// kind is one of not_null, unique, fkey, fkey_restrict, type.
class ConstraintError : public Error {
 public:
  ConstraintError(std::string kind, const std::string& message, std::string location = {})
      : Error(ErrorCode::constraint, message, std::move(location)), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class RightsError : public Error {
 public:
  explicit RightsError(const std::string& message, std::string location = {})
      : Error(ErrorCode::rights, message, std::move(location)) {}
};

class NotFound : public Error {
 public:
  explicit NotFound(const std::string& message, std::string location = {})
      : Error(ErrorCode::not_found, message, std::move(location)) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& message, std::string location = {})
      : Error(ErrorCode::invalid_argument, message, std::move(location)) {}
};

/// Malformed or unknown client credentials.
class Unauthorized : public Error {
 public:
  explicit Unauthorized(const std::string& message, std::string location = {})
      : Error(ErrorCode::unauthorized, message, std::move(location)) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message, std::string location = {})
      : Error(ErrorCode::io, message, std::move(location)) {}
};

}  // namespace modeladapt
