#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "nvcalib/physics.hpp"
#include "nvcalib/provider.hpp"
#include "nvcalib/pso.hpp"

namespace nvcalib {

/// Frequency window of a swept acquisition.
struct SweepWindow {
  double f_start_hz = 2.790e9;
  double f_stop_hz = 2.950e9;
  int n_points = 1334;
};

struct ProviderConfig {
  std::string kind = "simulator";  // "simulator" or "remote"
  std::string endpoint;            // "host:port" when remote
  double settle_time_s = 0.05;
  double timeout_s = 5.0;
  double max_field_t = 10e-3;
  /// Field direction the simulated crystal is aligned to, i.e. the bias
  /// field that projects equally on all four axes. Models the mounting
  /// misalignment a vector calibration has to find.
  std::optional<BiasField> overlap_truth;
};

/// Search settings for the bias-field calibration. The sweep watches a
/// 20 MHz window around the resonance of the nominal 2.12 mT main field,
/// where the overlapped feature forms, at the survey step resolution.
struct CalibrationConfig {
  PsoConfig pso{};
  SweepWindow sweep{2.894e9, 2.914e9, 168};
  double crop_half_width_hz = 5.0e6;
};

struct LockinConfig {
  /// Peak deviation; defaults to half the model linewidth when unset.
  std::optional<double> mod_depth_hz;
  bool three_tone = true;
  double tau_s = 1e-3;
  int phase_samples = 64;
  std::string tone_norm = "average";  // "average" or "sum"
  double output_gain = 1.0;
};

/// Per-sensing-mode inputs of the sensitivity pipeline.
struct ModeConfig {
  BiasField field{};
  double white_density_v_rthz = 0.0;
  double electronic_floor_v_rthz = 0.0;
  /// When set (simulator only), the lock-in output gain is calibrated so
  /// the noiseless central slope equals this target before measuring.
  std::optional<double> slope_target_v_per_hz;
  /// Rough location of the feature whose slope is measured; refined to the
  /// nearest model resonance before sweeping.
  std::optional<double> center_hint_hz;
};

struct SensitivityConfig {
  double fs_hz = 53.57e3;
  double duration_s = 1.0;
  int n_records = 1;
  double band_lo_hz = 1.0;
  /// Defaults to the lock-in ENBW when unset.
  std::optional<double> band_hi_hz;
  double slope_window_half_hz = 4.5e6;
  double slope_step_hz = 7.5e3;
  double slope_fit_half_window_hz = 80e3;
  ModeConfig separated{};
  ModeConfig overlapped{};
};

/// Complete run configuration of the command-line tool. Loading is strict:
/// unknown keys are rejected by name.
struct RunConfig {
  std::uint64_t seed = 1;
  Constants constants{};
  SpectrumModel model{};
  NoiseModel noise{};
  ProviderConfig provider{};
  CalibrationConfig calibration{};
  SweepWindow sweep{};
  LockinConfig lockin{};
  SensitivityConfig sensitivity{};
  std::string out_dir = ".";

  void validate() const;
};

/// Defaults describing the reference bench: a 2.12 mT bias field on a
/// slightly misaligned crystal, separated and overlapped sensing modes
/// with their measured noise levels and slope targets.
RunConfig default_config();

RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::string& path);
std::string config_to_json(const RunConfig& cfg, int indent = 2);

}  // namespace nvcalib
