#include "nvcalib/workflows.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nvcalib/errors.hpp"
#include "nvcalib/remote.hpp"
#include "nvcalib/rng.hpp"

namespace nvcalib {

namespace {

const ModeConfig& mode_config(const RunConfig& cfg, SensingMode mode) {
  return mode == SensingMode::separated ? cfg.sensitivity.separated
                                        : cfg.sensitivity.overlapped;
}

/// Model resonance nearest the configured hint; without a hint, nearest the
/// mean of the four orientation resonances.
double feature_center(const RunConfig& cfg, const ModeConfig& mc) {
  SpectrumModel model = cfg.model;
  model.constants = cfg.constants;
  const auto centers =
      resonance_centers(mc.field, cfg.constants, simulator_axes(cfg));
  const double anchor =
      mc.center_hint_hz
          ? *mc.center_hint_hz
          : std::accumulate(centers.begin(), centers.end(), 0.0) / 4.0;
  double best = centers[0];
  for (double c : centers)
    if (std::abs(c - anchor) < std::abs(best - anchor)) best = c;
  return best;
}

/// Loss provider adapter: one cw sweep of the calibration window per
/// candidate field.
class ProviderLoss final : public LossProvider {
 public:
  ProviderLoss(SweepProvider& provider, const SweepWindow& window)
      : provider_(provider), window_(window) {}

  Sweep evaluate(const BiasField& field) override {
    SweepRequest req;
    req.f_start_hz = window_.f_start_hz;
    req.f_stop_hz = window_.f_stop_hz;
    req.n_points = window_.n_points;
    req.mode = SweepMode::cw;
    req.field = field;
    return provider_.acquire(req);
  }

  bool concurrency_safe() const override {
    return provider_.descriptor().concurrency_safe;
  }

 private:
  SweepProvider& provider_;
  SweepWindow window_;
};

}  // namespace

const char* to_string(SensingMode m) {
  return m == SensingMode::separated ? "separated" : "overlapped";
}

NVAxes simulator_axes(const RunConfig& cfg) {
  if (cfg.provider.overlap_truth)
    return NVAxes::aligned_to(cfg.provider.overlap_truth->vec());
  return NVAxes::canonical();
}

LockinSettings lockin_settings(const RunConfig& cfg) {
  LockinSettings s;
  s.mod_depth_hz =
      cfg.lockin.mod_depth_hz.value_or(0.5 * cfg.model.linewidth_hz);
  s.three_tone = cfg.lockin.three_tone;
  s.phase_samples = cfg.lockin.phase_samples;
  s.tone_norm = cfg.lockin.tone_norm == "sum"
                    ? LockinSettings::ToneNorm::sum
                    : LockinSettings::ToneNorm::average;
  s.output_gain = cfg.lockin.output_gain;
  return s;
}

std::unique_ptr<SweepProvider> make_simulator(
    const RunConfig& cfg, std::optional<LockinSettings> lockin_override,
    std::optional<double> white_density_override) {
  SimulatorConfig sim;
  sim.model = cfg.model;
  sim.model.constants = cfg.constants;
  sim.axes = simulator_axes(cfg);
  sim.noise = cfg.noise;
  if (white_density_override)
    sim.noise.white_density_v_rthz = *white_density_override;
  sim.lockin = lockin_override ? *lockin_override : lockin_settings(cfg);
  sim.enbw_hz = enbw_fourth_order(cfg.lockin.tau_s);
  sim.max_field_t = cfg.provider.max_field_t;
  sim.seed = StreamKey(cfg.seed).mix("provider").value();
  return std::make_unique<SimulatorProvider>(sim);
}

std::unique_ptr<SweepProvider> make_provider(const RunConfig& cfg) {
  if (cfg.provider.kind == "remote") {
    const auto colon = cfg.provider.endpoint.rfind(':');
    if (colon == std::string::npos || colon == 0 ||
        colon + 1 == cfg.provider.endpoint.size())
      throw ConfigError("provider.endpoint must look like 'host:port'");
    RemoteOptions opt;
    opt.timeout_s = cfg.provider.timeout_s;
    opt.settle_time_s = cfg.provider.settle_time_s;
    opt.max_field_t = cfg.provider.max_field_t;
    int port = 0;
    try {
      port = std::stoi(cfg.provider.endpoint.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("provider.endpoint has a bad port");
    }
    return std::make_unique<RemoteProvider>(
        cfg.provider.endpoint.substr(0, colon), port, opt);
  }
  return make_simulator(cfg);
}

SlopeMeasurement measure_slope(const RunConfig& cfg, SensingMode mode) {
  const ModeConfig& mc = mode_config(cfg, mode);
  const double center = feature_center(cfg, mc);
  const double fit_half = cfg.sensitivity.slope_fit_half_window_hz;

  LockinSettings settings = lockin_settings(cfg);
  double gain = settings.output_gain;
  if (mc.slope_target_v_per_hz && cfg.provider.kind == "simulator") {
    // Calibrate the output amplifier against the mode's slope target: a
    // noiseless fine sweep of the central crossing at unit gain gives the
    // raw V/Hz slope of the demodulated feature.
    SpectrumModel model = cfg.model;
    model.constants = cfg.constants;
    LockinSettings unit = settings;
    unit.output_gain = 1.0;
    const double grid_half = std::max(250e3, 2.0 * fit_half);
    const int n = static_cast<int>(std::llround(grid_half / 2.5e3)) * 2 + 1;
    Sweep fine = lockin_spectrum(
        model, mc.field, uniform_grid(center - grid_half, center + grid_half, n),
        unit, simulator_axes(cfg));
    const SlopeFit raw = fit_zero_crossing(fine, center, fit_half);
    gain = *mc.slope_target_v_per_hz / std::abs(raw.slope_v_per_hz);
  }

  std::unique_ptr<SweepProvider> provider;
  if (cfg.provider.kind == "simulator") {
    LockinSettings gained = settings;
    gained.output_gain = gain;
    provider = make_simulator(cfg, gained, mc.white_density_v_rthz);
  } else {
    provider = make_provider(cfg);
  }

  provider->set_field(mc.field);
  SweepRequest req;
  req.f_start_hz = center - cfg.sensitivity.slope_window_half_hz;
  req.f_stop_hz = center + cfg.sensitivity.slope_window_half_hz;
  req.n_points = static_cast<int>(std::llround(
                     2.0 * cfg.sensitivity.slope_window_half_hz /
                     cfg.sensitivity.slope_step_hz)) +
                 1;
  req.mode = SweepMode::lockin;
  Sweep sweep = provider->acquire(req);

  SlopeMeasurement out;
  out.fit = fit_zero_crossing(sweep, center, fit_half);
  out.output_gain = gain;
  out.feature_center_hz = center;
  out.response_v_per_t = slope_to_field_response(
      std::abs(out.fit.slope_v_per_hz), cfg.constants,
      mode == SensingMode::overlapped);
  out.sweep = std::move(sweep);
  return out;
}

SensitivityArtifacts run_sensitivity(const RunConfig& cfg, SensingMode mode) {
  const ModeConfig& mc = mode_config(cfg, mode);
  SensitivityArtifacts art;
  art.slope = measure_slope(cfg, mode);

  const double fs = cfg.sensitivity.fs_hz;
  const double duration = cfg.sensitivity.duration_s;
  const int n_records = cfg.sensitivity.n_records;

  NoiseModel quiet;
  quiet.white_density_v_rthz = mc.white_density_v_rthz;
  quiet.electronic_floor_v_rthz = mc.electronic_floor_v_rthz;
  quiet.mains_lines_hz_v.clear();

  NoiseModel on_signal = quiet;
  on_signal.mains_lines_hz_v = cfg.noise.mains_lines_hz_v;

  NoiseModel floor;
  floor.electronic_floor_v_rthz = mc.electronic_floor_v_rthz;
  floor.mains_lines_hz_v.clear();

  const auto record_set = [&](const NoiseModel& noise, const char* tag) {
    std::vector<std::vector<double>> traces;
    traces.reserve(static_cast<std::size_t>(n_records));
    for (int k = 0; k < n_records; ++k) {
      const std::uint64_t seed = StreamKey(cfg.seed)
                                     .mix("trace")
                                     .mix(to_string(mode))
                                     .mix(tag)
                                     .mix(static_cast<std::uint64_t>(k))
                                     .value();
      traces.push_back(synth_timetrace(art.slope.response_v_per_t, {}, noise,
                                       fs, duration, seed));
    }
    return averaged_spectral_density(traces, fs);
  };
  art.quiet_spectrum = record_set(quiet, "quiet");
  art.on_signal_spectrum = record_set(on_signal, "onsignal");
  art.floor_spectrum = record_set(floor, "floor");

  const double enbw = enbw_fourth_order(cfg.lockin.tau_s);
  const double band_lo = cfg.sensitivity.band_lo_hz;
  const double band_hi = cfg.sensitivity.band_hi_hz.value_or(enbw);
  const double v_noise = band_average(art.quiet_spectrum, band_lo, band_hi);
  const double v_floor = band_average(art.floor_spectrum, band_lo, band_hi);

  SensitivityReport& r = art.report;
  r.mode = to_string(mode);
  r.slope_v_per_hz = art.slope.fit.slope_v_per_hz;
  r.response_v_per_t = art.slope.response_v_per_t;
  r.voltage_noise_v_rthz = v_noise;
  r.field_sensitivity_t_rthz =
      field_sensitivity(v_noise, art.slope.response_v_per_t);
  r.electronic_floor_t_rthz =
      field_sensitivity(v_floor, art.slope.response_v_per_t);
  r.band_lo_hz = band_lo;
  r.band_hi_hz = band_hi;
  r.enbw_hz = enbw;
  r.n_records = n_records;
  return art;
}

CalibrationResult run_calibration(const RunConfig& cfg,
                                  SweepProvider& provider) {
  PsoConfig pso = cfg.calibration.pso;
  pso.seed = StreamKey(cfg.seed).mix("pso").value();
  ProviderLoss loss_provider(provider, cfg.calibration.sweep);
  TripletLossOptions loss_options;
  loss_options.crop_half_width_hz = cfg.calibration.crop_half_width_hz;
  loss_options.fit.spacing_hz = cfg.constants.delta_hf_hz;
  const SweepLossFn loss = make_triplet_loss(loss_options);
  return calibrate(pso, loss_provider, loss);
}

EnhancementReport run_enhancement(const RunConfig& cfg) {
  EnhancementReport rep;
  rep.separated = run_sensitivity(cfg, SensingMode::separated);
  rep.overlapped = run_sensitivity(cfg, SensingMode::overlapped);
  rep.enhancement = rep.separated.report.field_sensitivity_t_rthz /
                    rep.overlapped.report.field_sensitivity_t_rthz;
  return rep;
}

}  // namespace nvcalib
