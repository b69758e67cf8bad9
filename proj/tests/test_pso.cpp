#include <doctest.h>

#include <atomic>
#include <cmath>
#include <vector>

#include "nvcalib/config.hpp"
#include "nvcalib/errors.hpp"
#include "nvcalib/pso.hpp"
#include "nvcalib/provider.hpp"
#include "nvcalib/workflows.hpp"

using namespace nvcalib;

namespace {

/// Loss provider that hands the candidate field straight back through the
/// sweep metadata, so tests can shape the loss landscape analytically.
class EchoProvider : public LossProvider {
 public:
  explicit EchoProvider(bool parallel = false) : parallel_(parallel) {}

  Sweep evaluate(const BiasField& field) override {
    ++calls_;
    Sweep s;
    s.freqs_hz = {1.0, 2.0, 3.0};
    s.values_v = {0.0, 0.0, 0.0};
    s.meta.field = field;
    return s;
  }

  bool concurrency_safe() const override { return parallel_; }
  int calls() const { return calls_.load(); }

 private:
  bool parallel_;
  std::atomic<int> calls_{0};
};

/// Starts failing after a fixed number of successful evaluations.
class FailingProvider : public EchoProvider {
 public:
  explicit FailingProvider(int fail_after) : fail_after_(fail_after) {}

  Sweep evaluate(const BiasField& field) override {
    if (calls() >= fail_after_)
      throw ProviderError(ProviderFault::timeout, "link dropped");
    return EchoProvider::evaluate(field);
  }

 private:
  int fail_after_;
};

SweepLossFn bump_loss(double ty, double tz, double scale = 1.0,
                      double width = 0.5e-3) {
  return [=](const Sweep& s) {
    const double dy = s.meta.field.by_t - ty;
    const double dz = s.meta.field.bz_t - tz;
    return scale / (1.0 + (dy * dy + dz * dz) / (width * width));
  };
}

bool same_history(const std::vector<IterationRecord>& a,
                  const std::vector<IterationRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].iteration != b[i].iteration) return false;
    if (a[i].positions != b[i].positions) return false;
    if (a[i].losses != b[i].losses) return false;
    if (a[i].g_best_position != b[i].g_best_position) return false;
    if (a[i].g_best_loss != b[i].g_best_loss) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("init_swarm fills the boxes deterministically") {
  PsoConfig cfg;
  cfg.seed = 42;
  const Swarm a = init_swarm(cfg);
  const Swarm b = init_swarm(cfg);

  REQUIRE(a.particles.size() == 10);
  CHECK(a.iteration == 0);
  CHECK(a.history.empty());
  CHECK_FALSE(a.has_g_best);
  for (std::size_t i = 0; i < a.particles.size(); ++i) {
    const Particle& p = a.particles[i];
    for (int d = 0; d < 2; ++d) {
      CHECK(p.position[d] >= cfg.x_min[d]);
      CHECK(p.position[d] <= cfg.x_max[d]);
      CHECK(p.velocity[d] >= cfg.v_min[d]);
      CHECK(p.velocity[d] <= cfg.v_max[d]);
    }
    CHECK(p.best_position == p.position);
    CHECK_FALSE(p.evaluated);
    CHECK(p.position == b.particles[i].position);
    CHECK(p.velocity == b.particles[i].velocity);
  }

  PsoConfig other = cfg;
  other.seed = 43;
  const Swarm c = init_swarm(other);
  CHECK(c.particles[0].position != a.particles[0].position);
}

TEST_CASE("velocity rule matches the hand-written formula") {
  PsoConfig cfg;
  cfg.inertia = 0.7;
  cfg.c_local = 1.3;
  cfg.c_global = 2.1;
  cfg.v_min = {-10.0, -10.0};
  cfg.v_max = {10.0, 10.0};

  Particle p;
  p.position = {1.0, 2.0};
  p.velocity = {0.1, -0.2};
  p.best_position = {1.5, 1.0};
  const Coord2 g_best{0.0, 0.0};
  const std::array<double, 4> draws{0.25, 0.5, 0.75, 0.125};

  const Coord2 v = detail::update_velocity_with_draws(p, g_best, cfg, draws);
  // w*v + c_l*r_l*(lbest - x) + c_g*r_g*(gbest - x), per component:
  CHECK(v[0] == doctest::Approx(0.7 * 0.1 + 1.3 * 0.25 * 0.5 +
                                2.1 * 0.75 * (-1.0))
                    .epsilon(1e-15));
  CHECK(v[1] == doctest::Approx(0.7 * -0.2 + 1.3 * 0.5 * (-1.0) +
                                2.1 * 0.125 * (-2.0))
                    .epsilon(1e-15));

  cfg.v_min = {-1.0, -1.0};
  cfg.v_max = {1.0, 1.0};
  const Coord2 clamped =
      detail::update_velocity_with_draws(p, g_best, cfg, draws);
  CHECK(clamped[0] == -1.0);
  CHECK(clamped[1] == -1.0);
}

TEST_CASE("absorbing walls clamp position and zero the velocity") {
  PsoConfig cfg;
  Particle p;
  p.position = {1.45e-3, 0.0};
  p.velocity = {0.2e-3, 0.1e-3};
  update_position(p, cfg);
  CHECK(p.position[0] == cfg.x_max[0]);
  CHECK(p.velocity[0] == 0.0);
  CHECK(p.position[1] == doctest::Approx(0.1e-3).epsilon(1e-15));
  CHECK(p.velocity[1] == 0.1e-3);

  p.position = {-1.45e-3, 0.0};
  p.velocity = {-0.2e-3, 0.0};
  update_position(p, cfg);
  CHECK(p.position[0] == cfg.x_min[0]);
  CHECK(p.velocity[0] == 0.0);
}

TEST_CASE("config validation rejects malformed settings") {
  PsoConfig ok;
  CHECK_NOTHROW(ok.validate());

  PsoConfig bad = ok;
  bad.n_particles = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.x_min = {1.0, -1.0};
  bad.x_max = {1.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.inertia = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.density_fraction = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.max_iterations = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("the swarm climbs a smooth bump onto its peak") {
  const double ty = 0.4e-3, tz = -0.7e-3;
  EchoProvider provider;
  const SweepLossFn loss = bump_loss(ty, tz);

  for (std::uint64_t seed : {3, 7, 9}) {
    PsoConfig cfg;
    cfg.seed = seed;
    const CalibrationResult r = calibrate(cfg, provider, loss);
    const double dist =
        std::hypot(r.best_field.by_t - ty, r.best_field.bz_t - tz);
    INFO("seed ", seed, " landed ", dist, " T from the target");
    CHECK(dist < 1e-4);
    CHECK(r.best_field.bx_t == cfg.b_main_x_t);
    CHECK(r.iterations <= cfg.max_iterations);
    CHECK(static_cast<int>(r.history.size()) == r.iterations);

    // The running best never backslides, and the result reports its peak.
    for (std::size_t i = 1; i < r.history.size(); ++i)
      CHECK(r.history[i].g_best_loss >= r.history[i - 1].g_best_loss);
    CHECK(r.best_loss == r.history.back().g_best_loss);
  }
}

TEST_CASE("tied losses keep the earliest particle as global best") {
  EchoProvider provider;
  const SweepLossFn constant = [](const Sweep&) { return 1.0; };
  PsoConfig cfg;
  cfg.seed = 5;
  cfg.max_iterations = 1;
  const CalibrationResult r = calibrate(cfg, provider, constant);
  REQUIRE(r.history.size() == 1);
  CHECK(r.best_field.by_t == r.history[0].positions[0][0]);
  CHECK(r.best_field.bz_t == r.history[0].positions[0][1]);
  for (const double l : r.history[0].losses) CHECK(l == 1.0);
}

TEST_CASE("re-evaluating resting particles leaves local bests alone") {
  // Zero inertia and zero pull freeze the swarm in place after the first
  // move, so the second pass re-evaluates identical positions.
  PsoConfig cfg;
  cfg.seed = 11;
  cfg.inertia = 0.0;
  cfg.c_local = 0.0;
  cfg.c_global = 0.0;
  EchoProvider provider;
  const SweepLossFn loss = bump_loss(0.2e-3, 0.1e-3);

  Swarm swarm = init_swarm(cfg);
  step(swarm, provider, loss, cfg);
  const std::vector<Particle> after_first = swarm.particles;
  const Coord2 g1 = swarm.g_best_position;
  const double gl1 = swarm.g_best_loss;

  step(swarm, provider, loss, cfg);
  REQUIRE(swarm.particles.size() == after_first.size());
  for (std::size_t i = 0; i < swarm.particles.size(); ++i) {
    CHECK(swarm.particles[i].position == after_first[i].position);
    CHECK(swarm.particles[i].best_position == after_first[i].best_position);
    CHECK(swarm.particles[i].best_loss == after_first[i].best_loss);
  }
  CHECK(swarm.g_best_position == g1);
  CHECK(swarm.g_best_loss == gl1);
}

TEST_CASE("positive loss scaling cannot change the trajectory") {
  EchoProvider provider;
  PsoConfig cfg;
  cfg.seed = 17;
  cfg.max_iterations = 8;

  const CalibrationResult base =
      calibrate(cfg, provider, bump_loss(0.4e-3, -0.7e-3, 1.0));
  const CalibrationResult scaled =
      calibrate(cfg, provider, bump_loss(0.4e-3, -0.7e-3, 3.0));

  REQUIRE(base.history.size() == scaled.history.size());
  for (std::size_t i = 0; i < base.history.size(); ++i) {
    CHECK(base.history[i].positions == scaled.history[i].positions);
    CHECK(base.history[i].g_best_position ==
          scaled.history[i].g_best_position);
    for (std::size_t j = 0; j < base.history[i].losses.size(); ++j)
      CHECK(scaled.history[i].losses[j] ==
            doctest::Approx(3.0 * base.history[i].losses[j]).epsilon(1e-12));
  }
  CHECK(base.best_field.by_t == scaled.best_field.by_t);
  CHECK(base.best_field.bz_t == scaled.best_field.bz_t);
}

TEST_CASE("identical seeds give bit-identical runs") {
  EchoProvider provider;
  PsoConfig cfg;
  cfg.seed = 23;
  const SweepLossFn loss = bump_loss(-0.3e-3, 0.6e-3);
  const CalibrationResult a = calibrate(cfg, provider, loss);
  const CalibrationResult b = calibrate(cfg, provider, loss);
  CHECK(same_history(a.history, b.history));
  CHECK(a.best_field.by_t == b.best_field.by_t);
  CHECK(a.best_field.bz_t == b.best_field.bz_t);
  CHECK(a.best_loss == b.best_loss);
}

TEST_CASE("parallel and serial evaluation produce the same history") {
  PsoConfig cfg;
  cfg.seed = 29;
  cfg.max_iterations = 6;
  const SweepLossFn loss = bump_loss(0.1e-3, 0.2e-3);

  EchoProvider serial(false);
  EchoProvider parallel(true);
  const CalibrationResult a = calibrate(cfg, serial, loss);
  const CalibrationResult b = calibrate(cfg, parallel, loss);
  CHECK(same_history(a.history, b.history));
}

TEST_CASE("a provider failure aborts the pass without touching the swarm") {
  PsoConfig cfg;
  cfg.seed = 31;
  const SweepLossFn loss = bump_loss(0.0, 0.0);

  // Let one full pass succeed, then fail partway through the second.
  FailingProvider provider(15);
  Swarm swarm = init_swarm(cfg);
  step(swarm, provider, loss, cfg);

  const std::vector<Particle> before = swarm.particles;
  const Coord2 g_before = swarm.g_best_position;
  const double gl_before = swarm.g_best_loss;
  const int iter_before = swarm.iteration;
  const std::size_t hist_before = swarm.history.size();

  CHECK_THROWS_AS(step(swarm, provider, loss, cfg), ProviderError);

  REQUIRE(swarm.particles.size() == before.size());
  for (std::size_t i = 0; i < swarm.particles.size(); ++i) {
    CHECK(swarm.particles[i].position == before[i].position);
    CHECK(swarm.particles[i].velocity == before[i].velocity);
    CHECK(swarm.particles[i].best_position == before[i].best_position);
    CHECK(swarm.particles[i].best_loss == before[i].best_loss);
  }
  CHECK(swarm.g_best_position == g_before);
  CHECK(swarm.g_best_loss == gl_before);
  CHECK(swarm.iteration == iter_before);
  CHECK(swarm.history.size() == hist_before);
}

TEST_CASE("convergence counts the cluster around the global best") {
  PsoConfig cfg;  // radius 0.02e-3, fraction 0.8, ten particles
  Swarm swarm(0);
  swarm.particles.resize(10);
  swarm.g_best_position = {0.0, 0.0};
  swarm.g_best_loss = 1.0;
  swarm.has_g_best = true;
  swarm.iteration = 1;

  for (int i = 0; i < 8; ++i)
    swarm.particles[i].position = {0.01e-3, 0.0};
  swarm.particles[8].position = {1.0e-3, 0.0};
  swarm.particles[9].position = {0.0, -1.0e-3};
  CHECK(check_convergence(swarm, cfg));

  swarm.particles[7].position = {0.5e-3, 0.5e-3};  // now only 7 inside
  CHECK_FALSE(check_convergence(swarm, cfg));

  Swarm fresh(0);
  fresh.particles.resize(10);
  CHECK_THROWS_AS(check_convergence(fresh, cfg), std::invalid_argument);
}

TEST_CASE("a zero iteration budget still evaluates once") {
  EchoProvider provider;
  PsoConfig cfg;
  cfg.seed = 37;
  cfg.max_iterations = 0;
  const CalibrationResult r = calibrate(cfg, provider, bump_loss(0.0, 0.0));
  CHECK(r.iterations == 1);
  CHECK(r.history.size() == 1);
  CHECK_FALSE(r.converged);
  CHECK(provider.calls() == cfg.n_particles);
}

TEST_CASE("triplet loss settings are validated") {
  TripletLossOptions bad;
  bad.crop_half_width_hz = 1e6;  // under three hyperfine spacings
  CHECK_THROWS_AS(make_triplet_loss(bad), std::invalid_argument);
  bad = {};
  bad.min_width_hz = 0.0;
  CHECK_THROWS_AS(make_triplet_loss(bad), std::invalid_argument);
  bad = {};
  bad.suspect_width_hz = 0.1e6;  // below the collapse floor
  CHECK_THROWS_AS(make_triplet_loss(bad), std::invalid_argument);
}

TEST_CASE("triplet loss ranks overlap above partial overlap above misses") {
  RunConfig cfg = default_config();
  cfg.noise = NoiseModel{};
  auto provider = make_simulator(cfg);
  const SweepLossFn loss = make_triplet_loss();

  SweepRequest req;
  req.f_start_hz = cfg.calibration.sweep.f_start_hz;
  req.f_stop_hz = cfg.calibration.sweep.f_stop_hz;
  req.n_points = cfg.calibration.sweep.n_points;

  const BiasField truth = *cfg.provider.overlap_truth;
  req.field = truth;
  const double full = loss(provider->acquire(req));

  req.field = BiasField{truth.bx_t, truth.by_t + 0.03e-3, truth.bz_t};
  const double partial = loss(provider->acquire(req));

  req.field = BiasField{truth.bx_t, truth.by_t + 0.6e-3, truth.bz_t - 0.9e-3};
  const double off = loss(provider->acquire(req));

  CHECK(full > partial);
  CHECK(partial > off);
  CHECK(off == 0.0);
  // At full overlap the shared width lands on the intrinsic linewidth.
  CHECK(full == doctest::Approx(1.0 / 550e3).epsilon(0.05));
}

TEST_CASE("collapse spikes and leftover dips score zero") {
  const SweepLossFn loss = make_triplet_loss();
  const auto freqs = uniform_grid(2.894e9, 2.914e9, 168);

  // A single-sample needle is not a spectrum feature.
  Sweep spike;
  spike.freqs_hz = freqs;
  spike.values_v.assign(freqs.size(), 2.0);
  spike.values_v[80] = 1.8;
  CHECK(loss(spike) == 0.0);

  // A narrow triplet with a second group in the window: the cropped fit
  // can look sharp, but it leaves the second group unexplained.
  const double spacing = 2.16e6;
  auto dip = [&](double f, double center, double contrast) {
    const double h = 0.5 * 550e3;
    const double d = f - center;
    return contrast * h * h / (h * h + d * d);
  };
  Sweep stacked;
  stacked.freqs_hz = freqs;
  stacked.values_v.resize(freqs.size());
  const double c1 = 2.900e9;
  const double c2 = 2.908e9;
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    double dips = 0.0;
    for (int j = -1; j <= 1; ++j) {
      dips += dip(freqs[i], c1 + j * spacing, 0.01);
      dips += dip(freqs[i], c2 + j * spacing, 0.008);
    }
    stacked.values_v[i] = 2.0 * (1.0 - dips);
  }
  CHECK(loss(stacked) == 0.0);

  // A flat sweep has nothing to fit at all.
  Sweep flat;
  flat.freqs_hz = freqs;
  flat.values_v.assign(freqs.size(), 2.0);
  CHECK(loss(flat) == 0.0);
}
