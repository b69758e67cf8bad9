#pragma once

#include <stdexcept>
#include <string>

namespace nvcalib {

/// Thrown by the spectral fitter when the sweep contains no usable feature
/// (no dip rising above the noise floor of the record).
class FitDegenerate : public std::runtime_error {
 public:
  explicit FitDegenerate(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when a zero-crossing fit window contains no sign change.
class NoCrossing : public std::runtime_error {
 public:
  explicit NoCrossing(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when a spectral band average covers no bins.
class EmptyBand : public std::runtime_error {
 public:
  explicit EmptyBand(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown on malformed or rejected run configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class ProviderFault { timeout, protocol, range };

/// Any failure reported by a sweep provider: communication timeouts,
/// malformed wire traffic, or out-of-range field requests.
class ProviderError : public std::runtime_error {
 public:
  ProviderError(ProviderFault fault, const std::string& what)
      : std::runtime_error(what), fault_(fault) {}

  ProviderFault fault() const noexcept { return fault_; }

 private:
  ProviderFault fault_;
};

inline const char* to_string(ProviderFault f) {
  switch (f) {
    case ProviderFault::timeout: return "timeout";
    case ProviderFault::protocol: return "protocol";
    case ProviderFault::range: return "range";
  }
  return "unknown";
}

}  // namespace nvcalib
