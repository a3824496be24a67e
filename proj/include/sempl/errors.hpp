#pragma once

#include <stdexcept>
#include <string>

namespace sempl {

// Exit-code taxonomy shared by the library and the CLI:
//   UsageError -> 2, DataError -> 3, EnvError/ProviderError -> 4.

class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class EnvError : public std::runtime_error {
 public:
  explicit EnvError(const std::string& msg) : std::runtime_error(msg) {}
};

// Provider/KB failures. `retryable()` distinguishes transient transport
// failures from contract violations (e.g. two event types for one trigger).
class ProviderError : public EnvError {
 public:
  explicit ProviderError(const std::string& msg, bool retryable = true)
      : EnvError(msg), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

}  // namespace sempl
