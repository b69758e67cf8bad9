#include <benchmark/benchmark.h>

#include "nvcalib/config.hpp"
#include "nvcalib/fitting.hpp"
#include "nvcalib/pso.hpp"
#include "nvcalib/provider.hpp"
#include "nvcalib/sensitivity.hpp"
#include "nvcalib/workflows.hpp"

namespace {

using namespace nvcalib;

const RunConfig& bench_config() {
  static const RunConfig cfg = default_config();
  return cfg;
}

void BM_cw_spectrum(benchmark::State& state) {
  const RunConfig& cfg = bench_config();
  SpectrumModel model = cfg.model;
  const BiasField field = cfg.sensitivity.separated.field;
  const NVAxes axes = simulator_axes(cfg);
  const auto grid = uniform_grid(cfg.sweep.f_start_hz, cfg.sweep.f_stop_hz,
                                 cfg.sweep.n_points);
  for (auto _ : state) {
    Sweep s = cw_spectrum(model, field, grid, axes);
    benchmark::DoNotOptimize(s.values_v.data());
  }
}
BENCHMARK(BM_cw_spectrum);

void BM_lockin_spectrum(benchmark::State& state) {
  const RunConfig& cfg = bench_config();
  SpectrumModel model = cfg.model;
  const BiasField field = cfg.sensitivity.overlapped.field;
  const NVAxes axes = simulator_axes(cfg);
  const LockinSettings ls = lockin_settings(cfg);
  const auto grid = uniform_grid(2.8998e9, 2.9088e9, 1201);
  for (auto _ : state) {
    Sweep s = lockin_spectrum(model, field, grid, ls, axes);
    benchmark::DoNotOptimize(s.values_v.data());
  }
}
BENCHMARK(BM_lockin_spectrum);

void BM_fit_triplet(benchmark::State& state) {
  const RunConfig& cfg = bench_config();
  SpectrumModel model = cfg.model;
  const auto grid = uniform_grid(2.899e9, 2.909e9, 168);
  const Sweep sweep = cw_spectrum(model, cfg.sensitivity.overlapped.field,
                                  grid, simulator_axes(cfg));
  for (auto _ : state) {
    TripletFit fit = fit_triplet(sweep);
    benchmark::DoNotOptimize(&fit);
  }
}
BENCHMARK(BM_fit_triplet);

void BM_asd(benchmark::State& state) {
  const RunConfig& cfg = bench_config();
  NoiseModel noise;
  noise.white_density_v_rthz = 5.5e-6;
  const auto trace = synth_timetrace(4144.0, {}, noise, cfg.sensitivity.fs_hz,
                                     cfg.sensitivity.duration_s, 7);
  for (auto _ : state) {
    NoiseSpectrum s = amplitude_spectral_density(trace, cfg.sensitivity.fs_hz);
    benchmark::DoNotOptimize(s.asd_v_rthz.data());
  }
}
BENCHMARK(BM_asd);

void BM_pso_pass(benchmark::State& state) {
  const RunConfig& cfg = bench_config();
  auto provider = make_simulator(cfg);

  class Loss final : public LossProvider {
   public:
    Loss(SweepProvider& p, const SweepWindow& w) : p_(p), w_(w) {}
    Sweep evaluate(const BiasField& f) override {
      SweepRequest req;
      req.f_start_hz = w_.f_start_hz;
      req.f_stop_hz = w_.f_stop_hz;
      req.n_points = w_.n_points;
      req.field = f;
      return p_.acquire(req);
    }
    bool concurrency_safe() const override { return false; }

   private:
    SweepProvider& p_;
    SweepWindow w_;
  } loss_provider(*provider, cfg.calibration.sweep);

  TripletLossOptions loss_options;
  loss_options.crop_half_width_hz = cfg.calibration.crop_half_width_hz;
  const SweepLossFn loss = make_triplet_loss(loss_options);
  PsoConfig pso = cfg.calibration.pso;
  pso.seed = 11;
  for (auto _ : state) {
    Swarm swarm = init_swarm(pso);
    step(swarm, loss_provider, loss, pso);
    benchmark::DoNotOptimize(&swarm.g_best_loss);
  }
}
BENCHMARK(BM_pso_pass);

}  // namespace

BENCHMARK_MAIN();
