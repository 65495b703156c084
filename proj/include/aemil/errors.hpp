#ifndef AEMIL_ERRORS_HPP
#define AEMIL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace aemil {

// Shape conflicts between operands (reported with both shapes).
struct DimensionError : std::invalid_argument {
  explicit DimensionError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Input outside an operation's mathematical domain.
struct DomainError : std::invalid_argument {
  explicit DomainError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Invalid or inconsistent configuration; raised before any work starts.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed on-disk artifact (bag file, manifest, checkpoint).
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Operation invoked out of order (e.g. backward without forward caches).
struct StateError : std::runtime_error {
  explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite value where a finite one is required.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Metric is undefined for the given inputs (e.g. single-class AUROC).
struct MetricError : std::runtime_error {
  explicit MetricError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace aemil

#endif
