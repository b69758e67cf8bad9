#pragma once

#include <memory>

#include "nvcalib/config.hpp"
#include "nvcalib/fitting.hpp"
#include "nvcalib/provider.hpp"
#include "nvcalib/pso.hpp"
#include "nvcalib/sensitivity.hpp"

namespace nvcalib {

enum class SensingMode { separated, overlapped };

const char* to_string(SensingMode m);

/// Crystal axes used by the simulator for this run: aligned to the
/// configured overlap truth, or canonical when none is set.
NVAxes simulator_axes(const RunConfig& cfg);

/// Simulator built from the run configuration. `lockin_override` replaces
/// the configured lock-in settings (used for per-mode gain calibration).
std::unique_ptr<SweepProvider> make_simulator(
    const RunConfig& cfg, std::optional<LockinSettings> lockin_override = {},
    std::optional<double> white_density_override = {});

/// Provider selected by the configuration: the simulator above or a remote
/// client for provider.kind == "remote".
std::unique_ptr<SweepProvider> make_provider(const RunConfig& cfg);

/// Lock-in settings implied by the configuration.
LockinSettings lockin_settings(const RunConfig& cfg);

struct SlopeMeasurement {
  SlopeFit fit{};
  double response_v_per_t = 0.0;
  double output_gain = 1.0;
  double feature_center_hz = 0.0;
  Sweep sweep;
};

/// Measure the central lock-in slope of one sensing mode: locate the
/// feature nearest the configured hint, calibrate the output gain against
/// the slope target when one is set, acquire a lock-in sweep and fit the
/// central zero crossing.
SlopeMeasurement measure_slope(const RunConfig& cfg, SensingMode mode);

struct SensitivityArtifacts {
  SensitivityReport report{};
  SlopeMeasurement slope{};
  NoiseSpectrum quiet_spectrum{};     // white + electronic floor
  NoiseSpectrum on_signal_spectrum{}; // plus mains pickup
  NoiseSpectrum floor_spectrum{};     // electronics only
};

/// Full single-mode sensitivity pipeline: slope, synthetic noise records,
/// averaged spectra, band levels and the derived field sensitivities.
SensitivityArtifacts run_sensitivity(const RunConfig& cfg, SensingMode mode);

/// Bias-field search against the configured provider.
CalibrationResult run_calibration(const RunConfig& cfg,
                                  SweepProvider& provider);

struct EnhancementReport {
  SensitivityArtifacts separated{};
  SensitivityArtifacts overlapped{};
  /// Sensitivity gain of overlapping all orientations:
  /// separated sensitivity / overlapped sensitivity.
  double enhancement = 0.0;
};

EnhancementReport run_enhancement(const RunConfig& cfg);

}  // namespace nvcalib
