#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace shapetaylor {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function (e.g. Y₀ at 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Kernel evaluated at coincident points.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Normal offset whose Jacobian 1 + εvκ is not positive at some node.
class SelfIntersectionError : public Error {
 public:
  using Error::Error;
};

/// LU pivot below the relative tolerance.
class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

/// Shape-derivative order outside what a boundary condition supports.
class UnsupportedOrderError : public Error {
 public:
  using Error::Error;
};

/// A lower-order shape derivative needed by a recurrence is not available.
class MissingOrderError : public Error {
 public:
  using Error::Error;
};

/// Point source placed on (or within one node spacing of) the boundary.
class SourceOnBoundaryError : public Error {
 public:
  using Error::Error;
};

/// Observation sets that do not line up.
class MismatchError : public Error {
 public:
  using Error::Error;
};

/// Too many Monte Carlo samples failed to solve.
class SamplingError : public Error {
 public:
  using Error::Error;
};

using WarningHandler = std::function<void(std::string_view)>;

namespace detail {

struct WarningState {
  std::mutex mutex;
  WarningHandler handler = [](std::string_view msg) {
    std::cerr << "shapetaylor warning: " << msg << '\n';
  };
};

inline WarningState& warning_state() {
  static WarningState state;
  return state;
}

}  // namespace detail

/// Replaces the process-wide warning sink and returns the previous one.
inline WarningHandler set_warning_handler(WarningHandler handler) {
  auto& state = detail::warning_state();
  std::lock_guard lock(state.mutex);
  std::swap(state.handler, handler);
  return handler;
}

inline void warn(std::string_view message) {
  auto& state = detail::warning_state();
  std::lock_guard lock(state.mutex);
  if (state.handler) state.handler(message);
}

}  // namespace shapetaylor
