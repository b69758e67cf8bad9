#include "nvcalib/provider.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "nvcalib/errors.hpp"
#include "nvcalib/rng.hpp"

namespace nvcalib {

const char* to_string(SweepMode m) {
  return m == SweepMode::cw ? "cw" : "lockin";
}

SweepMode sweep_mode_from_string(std::string_view s) {
  if (s == "cw") return SweepMode::cw;
  if (s == "lockin") return SweepMode::lockin;
  throw std::invalid_argument("unknown sweep mode: " + std::string(s));
}

void SweepRequest::validate() const {
  if (!(f_start_hz > 0.0) || !(f_stop_hz > f_start_hz))
    throw std::invalid_argument(
        "sweep window must satisfy 0 < f_start < f_stop");
  if (n_points < 3)
    throw std::invalid_argument("sweep needs at least 3 points");
  if (!(mod_depth_hz >= 0.0))
    throw std::invalid_argument("modulation depth must be non-negative");
  if (field)
    field->validate(std::numeric_limits<double>::infinity());
}

std::vector<double> uniform_grid(double f_start_hz, double f_stop_hz,
                                 int n_points) {
  if (n_points < 2 || !(f_stop_hz > f_start_hz))
    throw std::invalid_argument("grid needs n >= 2 and f_start < f_stop");
  std::vector<double> grid(n_points);
  const double step = (f_stop_hz - f_start_hz) / (n_points - 1);
  for (int i = 0; i < n_points; ++i) grid[i] = f_start_hz + step * i;
  grid.front() = f_start_hz;
  grid.back() = f_stop_hz;
  return grid;
}

SimulatorProvider::SimulatorProvider(SimulatorConfig cfg)
    : cfg_(std::move(cfg)) {
  cfg_.model.validate();
  cfg_.axes.validate();
  cfg_.noise.validate();
  if (!(cfg_.enbw_hz > 0.0))
    throw std::invalid_argument("noise bandwidth must be positive");
  if (!(cfg_.max_field_t > 0.0))
    throw std::invalid_argument("field range must be positive");
}

ProviderDescriptor SimulatorProvider::descriptor() const {
  ProviderDescriptor d;
  d.kind = ProviderDescriptor::Kind::simulator;
  d.concurrency_safe = true;
  d.settle_time_s = 0.0;
  d.max_field_t = cfg_.max_field_t;
  return d;
}

void SimulatorProvider::set_field(const BiasField& field) {
  try {
    field.validate(cfg_.max_field_t);
  } catch (const std::invalid_argument& e) {
    // The previously selected field stays in effect.
    throw ProviderError(ProviderFault::range, e.what());
  }
  std::lock_guard<std::mutex> lock(mutex_);
  current_ = field;
}

Sweep SimulatorProvider::acquire(const SweepRequest& request) {
  request.validate();
  BiasField field;
  if (request.field) {
    field = *request.field;
  } else {
    std::lock_guard<std::mutex> lock(mutex_);
    field = current_;
  }
  try {
    field.validate(cfg_.max_field_t);
  } catch (const std::invalid_argument& e) {
    throw ProviderError(ProviderFault::range, e.what());
  }

  auto grid = uniform_grid(request.f_start_hz, request.f_stop_hz,
                           request.n_points);

  LockinSettings lk = cfg_.lockin;
  if (request.mod_depth_hz > 0.0) lk.mod_depth_hz = request.mod_depth_hz;
  if (request.three_tone) lk.three_tone = *request.three_tone;

  Sweep sweep = request.mode == SweepMode::cw
                    ? cw_spectrum(cfg_.model, field, std::move(grid),
                                  cfg_.axes)
                    : lockin_spectrum(cfg_.model, field, std::move(grid), lk,
                                      cfg_.axes);

  // Additive per-point noise with the statistics of a lock-in output
  // sampled at its noise bandwidth. The stream is keyed by everything that
  // identifies the acquisition, so identical requests repeat identically
  // and concurrent requests stay independent.
  const double density = std::hypot(cfg_.noise.white_density_v_rthz,
                                    cfg_.noise.electronic_floor_v_rthz);
  const double sigma = density * std::sqrt(cfg_.enbw_hz);
  if (sigma > 0.0) {
    StreamKey key(cfg_.seed);
    key.mix("acquire")
        .mix(field.bx_t)
        .mix(field.by_t)
        .mix(field.bz_t)
        .mix(request.f_start_hz)
        .mix(request.f_stop_hz)
        .mix(static_cast<std::uint64_t>(request.n_points))
        .mix(static_cast<std::uint64_t>(request.mode == SweepMode::cw ? 0
                                                                      : 1));
    if (request.mode == SweepMode::lockin)
      key.mix(lk.mod_depth_hz)
          .mix(static_cast<std::uint64_t>(lk.three_tone ? 1 : 0));
    Rng rng(key.value());
    for (double& v : sweep.values_v) v += sigma * rng.gaussian();
  }
  return sweep;
}

}  // namespace nvcalib
