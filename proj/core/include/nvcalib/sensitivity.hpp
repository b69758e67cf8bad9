#pragma once

#include <span>
#include <string>
#include <vector>

#include "nvcalib/physics.hpp"

namespace nvcalib {

/// One-sided amplitude spectral density of a time record.
struct NoiseSpectrum {
  std::vector<double> freqs_hz;
  std::vector<double> asd_v_rthz;
  double fs_hz = 0.0;
  double record_length_s = 0.0;
};

/// Full sensitivity characterization of one sensing mode.
struct SensitivityReport {
  std::string mode;  // "separated" or "overlapped"
  double slope_v_per_hz = 0.0;
  double response_v_per_t = 0.0;
  double voltage_noise_v_rthz = 0.0;
  double field_sensitivity_t_rthz = 0.0;
  double electronic_floor_t_rthz = 0.0;
  double band_lo_hz = 0.0;
  double band_hi_hz = 0.0;
  double enbw_hz = 0.0;
  int n_records = 1;
};

/// One-sided ASD from a single rectangular-window periodogram of the full
/// record, mean removed, DC excluded. Normalized so that
/// sum(asd^2) * bin_width recovers the record variance and a white density
/// d appears as a flat level d.
NoiseSpectrum amplitude_spectral_density(std::span<const double> trace,
                                         double fs_hz);

/// ASD with the power spectra of several equal-length records averaged
/// before the square root, which removes the single-record estimator bias.
NoiseSpectrum averaged_spectral_density(
    const std::vector<std::vector<double>>& traces, double fs_hz);

/// Mean ASD level over bins with f_lo <= f <= f_hi.
/// Throws EmptyBand when no bin falls inside.
double band_average(const NoiseSpectrum& spectrum, double f_lo_hz,
                    double f_hi_hz);

/// Magnetic sensitivity from a voltage noise density and a response, T/rtHz.
double field_sensitivity(double noise_v_rthz, double response_v_per_t);

/// Photon-shot-noise-limited sensitivity of a single fully overlapped
/// feature: p_f * linewidth / (gamma_e * contrast * sqrt(rate)).
double shot_noise_sensitivity(double linewidth_hz, double contrast,
                              double photon_rate_hz, const Constants& c);

/// Equivalent noise bandwidth of the fourth-order lock-in output filter
/// with time constant tau, Hz.
double enbw_fourth_order(double tau_s);

}  // namespace nvcalib
