#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nvcalib/geometry.hpp"

namespace nvcalib {

/// Physical constants of the spin system and detection chain. Defaults
/// describe an NV ensemble in diamond read out optically.
struct Constants {
  /// Zero-field splitting of the ground-state spin, Hz.
  double d_hz = 2.870e9;
  /// Electron gyromagnetic ratio, Hz per tesla.
  double gamma_e_hz_per_t = 28.0e9;
  /// Hyperfine splitting of the 14N triplet, Hz.
  double delta_hf_hz = 2.16e6;
  /// Tetrahedral bond angle, rad: acos(-1/3). Stored at full precision
  /// because cos(theta/2) must equal 1/sqrt(3) to about 1e-6.
  double theta_tet_rad = 1.9106332362490186;
  /// Electron g-factor.
  double g_e = 2.003;
  /// Bohr magneton, J/T.
  double mu_b_j_per_t = 9.2740100783e-24;
  /// Planck constant, J*s.
  double h_j_s = 6.62607015e-34;
  /// Lineshape prefactor 4/(3*sqrt(3)) of the shot-noise sensitivity formula.
  double p_f = 0.7698003589195010;

  double cos_half_theta() const;

  /// Rejects non-positive values, a gyromagnetic ratio inconsistent with
  /// g_e*mu_B/h beyond 0.5%, and cos(theta_tet/2) away from 1/sqrt(3) by
  /// more than 1e-6.
  void validate() const;
};

/// Applied bias field in the lab frame, tesla per axis.
struct BiasField {
  double bx_t = 0.0, by_t = 0.0, bz_t = 0.0;

  Vec3 vec() const { return {bx_t, by_t, bz_t}; }
  double norm_t() const { return vec().norm(); }

  /// Rejects non-finite components or any component beyond max_abs_t.
  void validate(double max_abs_t) const;
};

/// The four NV symmetry axes as unit vectors. The canonical set is the
/// diamond <111> family; rotated sets model a crystal mounted at an angle
/// to the coil frame.
struct NVAxes {
  std::array<Vec3, 4> axes;

  static NVAxes canonical();
  static NVAxes rotated(const Mat3& r);

  /// Axes of a crystal oriented so that `target` projects identically on
  /// all four of them, i.e. `target` sits along a cube axis of the rotated
  /// lattice. Used to model the misalignment a vector calibration must
  /// compensate: the returned frame makes `target` the unique fully
  /// overlapped field direction near itself.
  static NVAxes aligned_to(const Vec3& target);

  /// Rejects non-unit axes and pairwise angles away from the tetrahedral
  /// value (unsigned: axes compared modulo sign).
  void validate() const;
};

/// Lorentzian dip model of the optically detected resonance spectrum.
struct SpectrumModel {
  /// Background photodetector level, volts.
  double f0_v = 1.0;
  /// Fractional contrast of a single hyperfine line of a single
  /// orientation. A fully overlapped feature is 4x deeper.
  double contrast = 0.005;
  /// Lorentzian FWHM of one hyperfine line, Hz.
  double linewidth_hz = 550e3;

  Constants constants{};

  /// Rejects f0 <= 0, contrast outside (0, 1/12] (twelve lines must not
  /// drive the signal negative), and linewidth <= 0.
  void validate() const;
};

/// Additive noise in the detection chain, all densities in V/sqrt(Hz) and
/// tone amplitudes in volts. Mains frequencies default to the 50 Hz family
/// with zero amplitude until configured.
struct NoiseModel {
  double white_density_v_rthz = 0.0;
  std::vector<std::pair<double, double>> mains_lines_hz_v{
      {50.0, 0.0}, {100.0, 0.0}, {150.0, 0.0}};
  double electronic_floor_v_rthz = 0.0;

  void validate() const;
};

/// Descriptive tags carried alongside acquired sweep data.
struct SweepMeta {
  BiasField field{};
  std::string mode = "cw";  // "cw" or "lockin"
  double mod_depth_hz = 0.0;
  bool three_tone = false;
};

/// A frequency sweep: strictly increasing grid plus one signal value per
/// grid point.
struct Sweep {
  std::vector<double> freqs_hz;
  std::vector<double> values_v;
  SweepMeta meta{};

  std::size_t size() const { return freqs_hz.size(); }

  /// Rejects mismatched lengths, fewer than 3 points, or a grid that is
  /// not strictly increasing.
  void validate() const;
};

/// Modulation and demodulation settings of the lock-in detection path.
struct LockinSettings {
  /// Peak frequency deviation of the carrier, Hz.
  double mod_depth_hz = 275e3;
  /// Add carriers at +/- the hyperfine splitting so all three hyperfine
  /// lines contribute to one demodulated feature.
  bool three_tone = false;
  /// Samples per modulation period used by the demodulator (>= 32).
  int phase_samples = 64;
  /// Three-tone scaling: average keeps the output comparable to the
  /// single-tone case, sum keeps the raw accumulated signal.
  enum class ToneNorm { average, sum };
  ToneNorm tone_norm = ToneNorm::average;
  /// Output amplifier gain applied to the demodulated signal.
  double output_gain = 1.0;

  void validate(double linewidth_hz) const;
};

/// |b.u_i| for the four orientation axes, tesla.
std::array<double, 4> project_field(const BiasField& b,
                                    const NVAxes& axes = NVAxes::canonical());

/// Upper-branch resonance frequencies d + gamma_e*|B_i|, Hz.
std::array<double, 4> resonance_centers(
    const BiasField& b, const Constants& c,
    const NVAxes& axes = NVAxes::canonical());

/// Photodetector voltage at one probe frequency for given axis projections.
double cw_value(const SpectrumModel& m, const std::array<double, 4>& proj_t,
                double freq_hz);

/// Swept continuous-wave spectrum: twelve Lorentzian dips (four
/// orientations x three hyperfine lines) on a flat background.
Sweep cw_spectrum(const SpectrumModel& m, const BiasField& b,
                  std::vector<double> freqs_hz,
                  const NVAxes& axes = NVAxes::canonical());

/// Demodulated first-harmonic lock-in spectrum of the same lineshape.
/// The carrier is frequency-modulated sinusoidally with the given depth;
/// for small depth the output approaches mod_depth * dF/df.
Sweep lockin_spectrum(const SpectrumModel& m, const BiasField& b,
                      std::vector<double> freqs_hz, const LockinSettings& s,
                      const NVAxes& axes = NVAxes::canonical());

/// Lock-in output time series: slope * field_signal plus white, mains and
/// electronic-floor noise, sampled at fs for the given duration. An empty
/// field_signal means a magnetically quiet record; otherwise its length
/// must equal round(fs*duration). Rejects records shorter than 8 samples.
std::vector<double> synth_timetrace(double slope_v_per_t,
                                    std::span<const double> field_signal_t,
                                    const NoiseModel& noise, double fs_hz,
                                    double duration_s, std::uint64_t seed);

}  // namespace nvcalib
