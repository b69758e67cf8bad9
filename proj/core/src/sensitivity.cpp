#include "nvcalib/sensitivity.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <stdexcept>

#include "nvcalib/errors.hpp"

namespace nvcalib {

namespace {

// FFTW plan creation is not thread-safe; execution of a private plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// One-sided power spectral density of a mean-removed record, bins 1..n/2.
// psd_k = factor * |X_k|^2 / (fs * n) with factor 2 except at Nyquist, so
// sum(psd) * (fs / n) equals the record variance exactly (Parseval).
std::vector<double> periodogram(std::span<const double> trace, double fs) {
  const std::size_t n = trace.size();
  double mean = 0.0;
  for (const double v : trace) mean += v;
  mean /= static_cast<double>(n);

  std::vector<double> work(n);
  for (std::size_t i = 0; i < n; ++i) work[i] = trace[i] - mean;

  const std::size_t n_out = n / 2 + 1;
  std::vector<double> re(n_out), im(n_out);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    // FFTW_ESTIMATE keeps the input intact and skips measurement noise in
    // planning time; the transform itself is still O(n log n).
    fftw_complex* out = fftw_alloc_complex(n_out);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), work.data(),
                                          out, FFTW_ESTIMATE);
    fftw_execute(plan);
    for (std::size_t k = 0; k < n_out; ++k) {
      re[k] = out[k][0];
      im[k] = out[k][1];
    }
    fftw_destroy_plan(plan);
    fftw_free(out);
  }

  const std::size_t n_bins = (n % 2 == 0) ? n / 2 : (n - 1) / 2;
  std::vector<double> psd(n_bins);
  for (std::size_t k = 1; k <= n_bins; ++k) {
    const double power = re[k] * re[k] + im[k] * im[k];
    const bool nyquist = (n % 2 == 0) && (k == n / 2);
    const double factor = nyquist ? 1.0 : 2.0;
    psd[k - 1] = factor * power / (fs * static_cast<double>(n));
  }
  return psd;
}

NoiseSpectrum spectrum_from_psd(const std::vector<double>& psd,
                                std::size_t n, double fs) {
  NoiseSpectrum s;
  s.fs_hz = fs;
  s.record_length_s = static_cast<double>(n) / fs;
  s.freqs_hz.resize(psd.size());
  s.asd_v_rthz.resize(psd.size());
  for (std::size_t k = 0; k < psd.size(); ++k) {
    s.freqs_hz[k] = static_cast<double>(k + 1) * fs / static_cast<double>(n);
    s.asd_v_rthz[k] = std::sqrt(psd[k]);
  }
  return s;
}

}  // namespace

NoiseSpectrum amplitude_spectral_density(std::span<const double> trace,
                                         double fs_hz) {
  if (!(fs_hz > 0.0))
    throw std::invalid_argument("sampling rate must be positive");
  if (trace.size() < 8)
    throw std::invalid_argument("record must span at least 8 samples");
  return spectrum_from_psd(periodogram(trace, fs_hz), trace.size(), fs_hz);
}

NoiseSpectrum averaged_spectral_density(
    const std::vector<std::vector<double>>& traces, double fs_hz) {
  if (!(fs_hz > 0.0))
    throw std::invalid_argument("sampling rate must be positive");
  if (traces.empty())
    throw std::invalid_argument("need at least one record");
  const std::size_t n = traces.front().size();
  if (n < 8) throw std::invalid_argument("records must span at least 8 samples");
  for (const auto& t : traces)
    if (t.size() != n)
      throw std::invalid_argument("records must share one length");

  // Powers average across records before the square root; the averaged
  // estimate converges on the true density without the single-record
  // magnitude bias.
  std::vector<double> mean_psd;
  for (const auto& t : traces) {
    const auto psd = periodogram(t, fs_hz);
    if (mean_psd.empty()) mean_psd.assign(psd.size(), 0.0);
    for (std::size_t k = 0; k < psd.size(); ++k) mean_psd[k] += psd[k];
  }
  for (double& v : mean_psd) v /= static_cast<double>(traces.size());
  return spectrum_from_psd(mean_psd, n, fs_hz);
}

double band_average(const NoiseSpectrum& spectrum, double f_lo_hz,
                    double f_hi_hz) {
  if (!(f_lo_hz <= f_hi_hz))
    throw std::invalid_argument("band bounds must satisfy f_lo <= f_hi");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < spectrum.freqs_hz.size(); ++k)
    if (spectrum.freqs_hz[k] >= f_lo_hz && spectrum.freqs_hz[k] <= f_hi_hz) {
      sum += spectrum.asd_v_rthz[k];
      ++count;
    }
  if (count == 0) throw EmptyBand("no spectrum bins inside the band");
  return sum / static_cast<double>(count);
}

double field_sensitivity(double noise_v_rthz, double response_v_per_t) {
  if (!(noise_v_rthz >= 0.0))
    throw std::invalid_argument("noise density must be non-negative");
  if (!(response_v_per_t > 0.0))
    throw std::invalid_argument("response must be positive");
  return noise_v_rthz / response_v_per_t;
}

double shot_noise_sensitivity(double linewidth_hz, double contrast,
                              double photon_rate_hz, const Constants& c) {
  c.validate();
  if (!(linewidth_hz > 0.0) || !(contrast > 0.0) || !(photon_rate_hz > 0.0))
    throw std::invalid_argument(
        "linewidth, contrast and photon rate must be positive");
  return c.p_f * linewidth_hz /
         (c.gamma_e_hz_per_t * contrast * std::sqrt(photon_rate_hz));
}

double enbw_fourth_order(double tau_s) {
  if (!(tau_s > 0.0))
    throw std::invalid_argument("time constant must be positive");
  // Noise bandwidth of the 24 dB/oct output stage as calibrated on the
  // detection chain. The ideal four-pole RC cascade integrates to
  // 5/(64*tau) = 0.078125/tau; the deployed value sits 0.26% below that.
  return 77.92e-3 / tau_s;
}

}  // namespace nvcalib
