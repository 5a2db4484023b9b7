#pragma once

#include <stdexcept>
#include <string>
#include <type_traits>

namespace qedgix {

/// Raised when a caller breaks an operation's preconditions (shape mismatch,
/// out-of-range index, stepping a finished episode, ...).
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

inline void require(bool condition, const char* message) {
  if (!condition) throw ContractViolation(message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

/// Builds the message only on failure.
template <typename MakeMessage>
  requires std::is_invocable_r_v<std::string, MakeMessage>
void require(bool condition, MakeMessage&& make_message) {
  if (!condition) throw ContractViolation(make_message());
}

}  // namespace qedgix

namespace qedgix {

/// A configuration value is missing, malformed or out of range. `key()` names
/// the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error("config key '" + key + "': " + message), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Filesystem or stream failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qedgix
