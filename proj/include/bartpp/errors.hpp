#ifndef BARTPP_ERRORS_HPP
#define BARTPP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bartpp {

// Error categories map one-to-one onto CLI exit codes (see tools/main.cpp):
// config 2, data 3, numerical 4.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace bartpp

#endif
