#ifndef SPRITE_ERRORS_HPP
#define SPRITE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace sprite {

// Bad user input: malformed files, inconsistent dimensions, invalid config.
struct input_error : std::invalid_argument {
  explicit input_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// Data-driven parameter estimation failed (no usable signal, empty aperture...).
struct estimation_error : std::runtime_error {
  explicit estimation_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Iterative solver diverged or hit an unrecoverable state.
struct solver_error : std::runtime_error {
  explicit solver_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sprite

#endif
