#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>

#include "nvcalib/physics.hpp"

namespace nvcalib {

enum class SweepMode { cw, lockin };

const char* to_string(SweepMode m);
SweepMode sweep_mode_from_string(std::string_view s);

/// Parameters of one requested acquisition. A request may carry its own
/// bias field; otherwise the provider's last set_field() applies.
struct SweepRequest {
  double f_start_hz = 2.790e9;
  double f_stop_hz = 2.950e9;
  int n_points = 1334;
  SweepMode mode = SweepMode::cw;
  std::optional<BiasField> field;
  /// Lock-in overrides; 0 / nullopt fall back to the provider defaults.
  double mod_depth_hz = 0.0;
  std::optional<bool> three_tone;

  void validate() const;
};

struct ProviderDescriptor {
  enum class Kind { simulator, remote };
  Kind kind = Kind::simulator;
  bool concurrency_safe = false;
  /// Wait applied after a remote field change, seconds.
  double settle_time_s = 0.0;
  /// Largest accepted per-axis field magnitude, tesla.
  double max_field_t = 10e-3;
};

/// A source of swept spectra: either the built-in physics simulator or a
/// remote instrument. acquire() returns exactly n_points samples on a
/// uniform grid or throws ProviderError.
class SweepProvider {
 public:
  virtual ~SweepProvider() = default;
  virtual ProviderDescriptor descriptor() const = 0;
  /// Select the bias field for subsequent requests that carry none.
  /// Out-of-range components raise ProviderError{range} and leave the
  /// previous field in place.
  virtual void set_field(const BiasField& field) = 0;
  virtual Sweep acquire(const SweepRequest& request) = 0;
};

struct SimulatorConfig {
  SpectrumModel model{};
  NVAxes axes = NVAxes::canonical();
  NoiseModel noise{};
  LockinSettings lockin{};
  /// Per-point noise std is white_density * sqrt(enbw_hz), mirroring the
  /// statistics of a lock-in output sampled at its noise bandwidth.
  double enbw_hz = 77.92;
  double max_field_t = 10e-3;
  std::uint64_t seed = 0;
};

/// Deterministic spectrum simulator. Noise streams are keyed by the seed,
/// the applied field and the request parameters, so repeating an
/// acquisition reproduces it bit-for-bit and concurrent acquisitions do
/// not interact.
class SimulatorProvider : public SweepProvider {
 public:
  explicit SimulatorProvider(SimulatorConfig cfg);

  ProviderDescriptor descriptor() const override;
  void set_field(const BiasField& field) override;
  Sweep acquire(const SweepRequest& request) override;

  const SimulatorConfig& config() const { return cfg_; }

 private:
  SimulatorConfig cfg_;
  BiasField current_{};
  mutable std::mutex mutex_;
};

/// Uniform grid from f_start to f_stop inclusive with exact endpoints.
std::vector<double> uniform_grid(double f_start_hz, double f_stop_hz,
                                 int n_points);

}  // namespace nvcalib
