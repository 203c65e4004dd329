#ifndef MLELAB_ERRORS_HPP
#define MLELAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mlelab {

/// Input file / flag / config problems. CLI maps this to exit code 2.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// A fitting routine could not produce a valid estimate. Exit code 3.
struct SolverError : std::runtime_error {
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

/// A metric has no defined value on the given data. Exit code 4.
struct MetricUndefined : std::runtime_error {
  explicit MetricUndefined(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mlelab

#endif  // MLELAB_ERRORS_HPP
