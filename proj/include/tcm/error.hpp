#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tcm {

// Exit-code family a failure belongs to.
enum class ErrorKind { config, data, internal };

// Every library failure carries a stable machine-readable code such as
// "DegeneratePolygon" or "TooFewPixels".
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message, ErrorKind kind = ErrorKind::data)
      : std::runtime_error(code + ": " + message), code_(std::move(code)), message_(message), kind_(kind) {}

  const std::string& code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }
  ErrorKind kind() const noexcept { return kind_; }

 private:
  std::string code_;
  std::string message_;
  ErrorKind kind_;
};

[[noreturn]] inline void fail(std::string code, const std::string& message,
                              ErrorKind kind = ErrorKind::data) {
  throw Error(std::move(code), message, kind);
}

inline void require(bool cond, std::string_view code, const std::string& message,
                    ErrorKind kind = ErrorKind::data) {
  if (!cond) fail(std::string(code), message, kind);
}

}  // namespace tcm
