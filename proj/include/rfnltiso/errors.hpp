#ifndef RFNLTISO_ERRORS_HPP
#define RFNLTISO_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rfnltiso {

// Process exit codes used by the command-line front end.
enum class ExitCode : int {
  ok = 0,
  failure = 1,
  config_error = 2,
  data_error = 3,
  divergence = 4,
};

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a recursion produces non-finite or exploding values.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

// switch_edge on a topology that is all-active or all-inactive.
class NoSwitchPossible : public std::logic_error {
 public:
  explicit NoSwitchPossible(const std::string& what) : std::logic_error(what) {}
};

namespace detail {

inline void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace detail
}  // namespace rfnltiso

#endif  // RFNLTISO_ERRORS_HPP
