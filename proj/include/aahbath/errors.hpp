#pragma once

#include <stdexcept>
#include <string>

namespace aahbath {

// invalid parameters or out-of-domain arguments; the CLI maps this to exit code 2
struct domain_error : std::runtime_error {
  explicit domain_error(const std::string& msg) : std::runtime_error(msg) {}
};

// convergence or stability failures; the CLI maps this to exit code 3
struct numerical_error : std::runtime_error {
  explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace aahbath
