#include "nvcalib/pso.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <future>
#include <stdexcept>

#include "nvcalib/errors.hpp"

namespace nvcalib {

void PsoConfig::validate() const {
  if (n_particles < 1)
    throw std::invalid_argument("need at least one particle");
  if (!(inertia >= 0.0) || !(c_local >= 0.0) || !(c_global >= 0.0))
    throw std::invalid_argument("pso coefficients must be non-negative");
  for (int d = 0; d < 2; ++d) {
    if (!(x_min[d] < x_max[d]))
      throw std::invalid_argument("position bounds must satisfy min < max");
    if (!(v_min[d] < v_max[d]))
      throw std::invalid_argument("velocity bounds must satisfy min < max");
  }
  if (!(density_radius_t > 0.0))
    throw std::invalid_argument("density radius must be positive");
  if (!(density_fraction > 0.0) || density_fraction > 1.0)
    throw std::invalid_argument("density fraction must lie in (0, 1]");
  if (max_iterations < 0)
    throw std::invalid_argument("max_iterations must be non-negative");
}

Swarm init_swarm(const PsoConfig& cfg) {
  cfg.validate();
  Swarm swarm(cfg.seed);
  swarm.particles.resize(cfg.n_particles);
  for (auto& p : swarm.particles) {
    for (int d = 0; d < 2; ++d)
      p.position[d] = swarm.rng.uniform(cfg.x_min[d], cfg.x_max[d]);
    for (int d = 0; d < 2; ++d)
      p.velocity[d] = swarm.rng.uniform(cfg.v_min[d], cfg.v_max[d]);
    p.best_position = p.position;
  }
  return swarm;
}

namespace detail {

Coord2 update_velocity_with_draws(const Particle& p, const Coord2& g_best,
                                  const PsoConfig& cfg,
                                  const std::array<double, 4>& draws) {
  Coord2 v{};
  for (int d = 0; d < 2; ++d) {
    v[d] = cfg.inertia * p.velocity[d] +
           cfg.c_local * draws[d] * (p.best_position[d] - p.position[d]) +
           cfg.c_global * draws[2 + d] * (g_best[d] - p.position[d]);
    v[d] = std::clamp(v[d], cfg.v_min[d], cfg.v_max[d]);
  }
  return v;
}

}  // namespace detail

Coord2 update_velocity(const Particle& p, const Coord2& g_best,
                       const PsoConfig& cfg, Rng& rng) {
  // Draw order is part of the reproducibility contract:
  // r_local(y), r_local(z), r_global(y), r_global(z).
  const std::array<double, 4> draws{rng.uniform(), rng.uniform(),
                                    rng.uniform(), rng.uniform()};
  return detail::update_velocity_with_draws(p, g_best, cfg, draws);
}

void update_position(Particle& p, const PsoConfig& cfg) {
  for (int d = 0; d < 2; ++d) {
    const double x = p.position[d] + p.velocity[d];
    if (x < cfg.x_min[d]) {
      p.position[d] = cfg.x_min[d];
      p.velocity[d] = 0.0;
    } else if (x > cfg.x_max[d]) {
      p.position[d] = cfg.x_max[d];
      p.velocity[d] = 0.0;
    } else {
      p.position[d] = x;
    }
  }
}

namespace {

/// Evaluate every particle, fold results into local and global bests in
/// particle order (strict improvement, earliest particle wins ties) and
/// append the history record. Throws without touching the swarm when any
/// evaluation fails.
void evaluate_pass(Swarm& swarm, LossProvider& provider,
                   const SweepLossFn& loss, const PsoConfig& cfg) {
  const std::size_t n = swarm.particles.size();
  std::vector<Coord2> positions(n);
  for (std::size_t i = 0; i < n; ++i)
    positions[i] = swarm.particles[i].position;

  std::vector<double> losses(n, 0.0);
  auto eval_one = [&](std::size_t i) {
    const BiasField field{cfg.b_main_x_t, positions[i][0], positions[i][1]};
    return loss(provider.evaluate(field));
  };

  if (provider.concurrency_safe() && n > 1) {
    std::vector<std::future<double>> futures;
    futures.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      futures.push_back(std::async(std::launch::async, eval_one, i));
    std::exception_ptr first_error;
    for (std::size_t i = 0; i < n; ++i) {
      try {
        losses[i] = futures[i].get();
      } catch (...) {
        if (!first_error) first_error = std::current_exception();
      }
    }
    if (first_error) std::rethrow_exception(first_error);
  } else {
    for (std::size_t i = 0; i < n; ++i) losses[i] = eval_one(i);
  }

  for (std::size_t i = 0; i < n; ++i) {
    auto& p = swarm.particles[i];
    if (!p.evaluated || losses[i] > p.best_loss) {
      p.best_loss = losses[i];
      p.best_position = positions[i];
      p.evaluated = true;
    }
  }
  for (const auto& p : swarm.particles) {
    if (!swarm.has_g_best || p.best_loss > swarm.g_best_loss) {
      swarm.g_best_loss = p.best_loss;
      swarm.g_best_position = p.best_position;
      swarm.has_g_best = true;
    }
  }

  IterationRecord rec;
  rec.iteration = swarm.iteration;
  rec.positions = std::move(positions);
  rec.losses = std::move(losses);
  rec.g_best_position = swarm.g_best_position;
  rec.g_best_loss = swarm.g_best_loss;
  swarm.history.push_back(std::move(rec));
  swarm.iteration += 1;
}

/// Move every particle using the bests settled in the preceding pass.
void move_pass(Swarm& swarm, const PsoConfig& cfg) {
  for (auto& p : swarm.particles) {
    p.velocity = update_velocity(p, swarm.g_best_position, cfg, swarm.rng);
    update_position(p, cfg);
  }
}

}  // namespace

void step(Swarm& swarm, LossProvider& provider, const SweepLossFn& loss,
          const PsoConfig& cfg) {
  cfg.validate();
  if (swarm.particles.empty())
    throw std::invalid_argument("swarm has no particles");
  evaluate_pass(swarm, provider, loss, cfg);
  move_pass(swarm, cfg);
}

bool check_convergence(const Swarm& swarm, const PsoConfig& cfg) {
  if (swarm.iteration < 1 || !swarm.has_g_best)
    throw std::invalid_argument(
        "convergence is defined only after a completed iteration");
  std::size_t inside = 0;
  for (const auto& p : swarm.particles) {
    const double dy = p.position[0] - swarm.g_best_position[0];
    const double dz = p.position[1] - swarm.g_best_position[1];
    if (std::hypot(dy, dz) <= cfg.density_radius_t) ++inside;
  }
  return static_cast<double>(inside) >=
         cfg.density_fraction * static_cast<double>(swarm.particles.size());
}

CalibrationResult calibrate(const PsoConfig& cfg, LossProvider& provider,
                            const SweepLossFn& loss) {
  cfg.validate();
  Swarm swarm = init_swarm(cfg);
  // A zero iteration budget still buys the initial evaluation pass, so the
  // caller always gets a defined (if unconverged) best.
  const int passes = std::max(1, cfg.max_iterations);
  bool converged = false;
  for (int pass = 0; pass < passes; ++pass) {
    evaluate_pass(swarm, provider, loss, cfg);
    if (cfg.max_iterations > 0 && check_convergence(swarm, cfg)) {
      converged = true;
      break;
    }
    if (pass + 1 < passes) move_pass(swarm, cfg);
  }

  CalibrationResult result;
  result.best_field =
      BiasField{cfg.b_main_x_t, swarm.g_best_position[0],
                swarm.g_best_position[1]};
  result.best_loss = swarm.g_best_loss;
  result.converged = converged;
  result.iterations = swarm.iteration;
  result.history = std::move(swarm.history);
  return result;
}

SweepLossFn make_triplet_loss(const TripletLossOptions& options) {
  if (!(options.crop_half_width_hz >= 1.5 * options.fit.spacing_hz))
    throw std::invalid_argument(
        "crop window must span at least three hyperfine spacings");
  if (!(options.min_width_hz > 0.0) ||
      !(options.suspect_width_hz > options.min_width_hz) ||
      !(options.clean_max_deviation_fraction > 0.0))
    throw std::invalid_argument("bad loss gate settings");
  return [options](const Sweep& sweep) -> double {
    sweep.validate();
    // Crop around the deepest sample so the triplet model sees one feature.
    const std::size_t imin =
        std::min_element(sweep.values_v.begin(), sweep.values_v.end()) -
        sweep.values_v.begin();
    const double center = sweep.freqs_hz[imin];
    Sweep local;
    local.meta = sweep.meta;
    for (std::size_t i = 0; i < sweep.size(); ++i)
      if (std::abs(sweep.freqs_hz[i] - center) <=
          options.crop_half_width_hz) {
        local.freqs_hz.push_back(sweep.freqs_hz[i]);
        local.values_v.push_back(sweep.values_v[i]);
      }
    if (local.freqs_hz.size() < 12 ||
        local.freqs_hz.back() - local.freqs_hz.front() <
            3.0 * options.fit.spacing_hz)
      return 0.0;  // feature hugs the window edge; nothing fittable
    try {
      const TripletFit fit = fit_triplet(local, std::nullopt, options.fit);
      const double width = fit.linewidths_hz[1];
      if (!(width >= options.min_width_hz)) return 0.0;  // collapse artifact
      double depth = 0.0;
      for (double c : fit.contrasts)
        depth = std::max(depth, c * fit.baseline_v);
      if (depth <= 0.0) return 0.0;
      if (width < options.suspect_width_hz) {
        // A width this good must account for every dip in the sweep, not
        // just the cropped feature; re-stacked composites cannot.
        double max_dev = 0.0;
        for (std::size_t i = 0; i < sweep.size(); ++i)
          max_dev = std::max(
              max_dev, std::abs(sweep.values_v[i] -
                                triplet_model_value(fit, sweep.freqs_hz[i])));
        if (max_dev > options.clean_max_deviation_fraction * depth)
          return 0.0;
      }
      return 1.0 / width;
    } catch (const FitDegenerate&) {
      return 0.0;
    }
  };
}

}  // namespace nvcalib
