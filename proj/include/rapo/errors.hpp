#pragma once

#include <stdexcept>
#include <string>

namespace rapo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition (bad sizes, out-of-range values).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// An iterative solver ran out of iterations or failed to bracket a root.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// An experiment configuration failed validation.
class ConfigError : public Error {
public:
    using Error::Error;
};

namespace detail {
inline void require(bool condition, const std::string& message) {
    if (!condition) throw InvalidArgument(message);
}
}  // namespace detail

}  // namespace rapo
