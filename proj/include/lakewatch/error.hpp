#pragma once

#include <stdexcept>
#include <string>

namespace lakewatch {

// Broad failure classes; the CLI maps these onto process exit codes.
enum class ErrorKind {
  Usage,   // bad flags, bad config
  Data,    // unreadable/invalid input data
  Remote,  // network, service, catalog
  State,   // illegal job state transition
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class RemoteError : public Error {
 public:
  RemoteError(const std::string& what, bool retryable)
      : Error(ErrorKind::Remote, what), retryable_(retryable) {}

  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& what) : Error(ErrorKind::State, what) {}
};

}  // namespace lakewatch
