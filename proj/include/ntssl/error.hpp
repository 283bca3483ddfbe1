#pragma once

#include <stdexcept>
#include <string>

namespace ntssl {

// Exit codes surfaced by the CLI. Library code throws; only tools/ maps to codes.
enum class ErrorKind : int {
  usage = 2,     // bad flags, bad config, malformed input file
  mismatch = 3,  // dataset/checkpoint inconsistency
  numeric = 4,   // non-finite values during training or evaluation
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::mismatch: return "mismatch";
    case ErrorKind::numeric: return "numeric";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

struct MismatchError : Error {
  explicit MismatchError(const std::string& what) : Error(ErrorKind::mismatch, what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

}  // namespace ntssl
