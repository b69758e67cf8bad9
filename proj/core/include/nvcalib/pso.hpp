#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "nvcalib/fitting.hpp"
#include "nvcalib/physics.hpp"
#include "nvcalib/rng.hpp"

namespace nvcalib {

/// Transverse field coordinates (b_y, b_z) searched by the swarm, tesla.
using Coord2 = std::array<double, 2>;

struct PsoConfig {
  int n_particles = 10;
  double inertia = 1.0;
  double c_local = 2.0;
  double c_global = 2.0;
  /// Search box for the transverse components, tesla. The wide defaults
  /// cover any plausible compensation field with margin; bench configs
  /// narrow them to the coarse-alignment box of the coil set (see
  /// default_config), which also keeps the reciprocal-linewidth loss free
  /// of false optima from isolated line groups.
  Coord2 x_min{-1.5e-3, -1.5e-3};
  Coord2 x_max{1.5e-3, 1.5e-3};
  Coord2 v_min{-0.3e-3, -0.3e-3};
  Coord2 v_max{0.3e-3, 0.3e-3};
  /// Fixed main-axis component of every candidate field, tesla.
  double b_main_x_t = 2.12e-3;
  /// Convergence: this fraction of the swarm must sit within
  /// density_radius_t of the global best.
  double density_radius_t = 0.02e-3;
  double density_fraction = 0.8;
  int max_iterations = 25;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Particle {
  Coord2 position{};
  Coord2 velocity{};
  Coord2 best_position{};
  double best_loss = 0.0;
  bool evaluated = false;
};

/// Snapshot of one evaluation pass, in evaluation order.
struct IterationRecord {
  int iteration = 0;
  std::vector<Coord2> positions;
  std::vector<double> losses;
  Coord2 g_best_position{};
  double g_best_loss = 0.0;
};

struct Swarm {
  std::vector<Particle> particles;
  Coord2 g_best_position{};
  double g_best_loss = 0.0;
  bool has_g_best = false;
  int iteration = 0;
  std::vector<IterationRecord> history;
  Rng rng;

  explicit Swarm(std::uint64_t seed) : rng(seed) {}
};

/// Source of loss sweeps for candidate fields. evaluate() must either
/// return a sweep or throw ProviderError; it must not fail silently.
class LossProvider {
 public:
  virtual ~LossProvider() = default;
  virtual Sweep evaluate(const BiasField& field) = 0;
  /// Whether evaluate() may be called from several threads at once.
  virtual bool concurrency_safe() const = 0;
};

/// Maps an acquired sweep to a scalar loss. Implementations decide how to
/// locate and fit the feature; degenerate sweeps must map to 0, not throw.
using SweepLossFn = std::function<double(const Sweep&)>;

/// Settings of the standard search loss. The loss is deliberately more
/// forgiving than an analysis fit: mid-search spectra are partially
/// overlapped blobs whose triplet fits are structurally poor, or so broad
/// that the solver spends its whole budget crawling down a shallow valley,
/// yet whose fitted widths still carry the gradient toward full overlap.
/// Both kinds are scored by reciprocal width rather than rejected.
///
/// Two guards keep that tolerance from rewarding misfits. The fit runs
/// with a shared linewidth, denying the solver the trick of sharpening
/// the central line by leaning it against an artificially broadened or
/// needle-thin sibling. And a fit narrow enough to rival a genuine
/// overlap must also explain the entire sweep: when the orientation
/// splitting is commensurate with the hyperfine spacing, line groups
/// re-stack on each other's sidelines and the misfit returns a width at
/// or below the intrinsic linewidth, but it always leaves unmodeled
/// outrigger dips somewhere in the window. Genuine near-overlap spectra
/// have nothing else in the window to leave behind.
struct TripletLossOptions {
  double crop_half_width_hz = 5.0e6;
  /// Residual acceptance is opened fully; quality control happens via the
  /// width gates below, not the fit's own convergence verdict.
  TripletFitOptions fit{.residual_depth_fraction = 1.0,
                        .shared_linewidth = true};
  /// Hard floor on the central width. A fitted line far below the sweep's
  /// resolution is a collapse artifact (a spike parked on one sample), not
  /// a spectrum feature.
  double min_width_hz = 200e3;
  /// Widths below this are accepted only when the fit explains the whole
  /// sweep (see clean_max_deviation_fraction). Roughly twice a typical
  /// ensemble overlap width: any fit claiming that league must be checked,
  /// or the search simply surfs whatever boundary this gate has.
  double suspect_width_hz = 1.2e6;
  /// Largest absolute deviation between fitted model and any sample of
  /// the full sweep, as a fraction of the fitted dip depth, for a
  /// suspect-width fit to count. Near-overlap fits sit below this;
  /// re-stacked composites leave behind dips far above it.
  double clean_max_deviation_fraction = 0.15;
};

/// Standard loss: crop a window around the deepest dip, fit the hyperfine
/// triplet, return the reciprocal central linewidth. Degenerate sweeps and
/// suspiciously narrow fits with dirty residuals score 0.
SweepLossFn make_triplet_loss(const TripletLossOptions& options = {});

/// Uniformly random positions and velocities inside the configured boxes.
/// No evaluations are performed.
Swarm init_swarm(const PsoConfig& cfg);

namespace detail {
/// Velocity rule with the four uniform(0,1) draws supplied explicitly:
/// v' = w*v + c_l*r_l.(lbest - x) + c_g*r_g.(gbest - x), then clamped to
/// the velocity box componentwise.
Coord2 update_velocity_with_draws(const Particle& p, const Coord2& g_best,
                                  const PsoConfig& cfg,
                                  const std::array<double, 4>& draws);
}  // namespace detail

/// Draws r_l, r_g componentwise from rng and applies the velocity rule.
Coord2 update_velocity(const Particle& p, const Coord2& g_best,
                       const PsoConfig& cfg, Rng& rng);

/// x' = x + v, clamped to the position box; a clamped component also has
/// its velocity zeroed (absorbing walls).
void update_position(Particle& p, const PsoConfig& cfg);

/// One synchronous iteration: evaluate every particle at its current
/// position, update local and global bests (strict improvement, first
/// particle wins ties), record history, then move the swarm. A provider
/// error aborts the iteration without mutating the swarm. Providers that
/// declare concurrency safety are evaluated in parallel; results are merged
/// in particle order either way.
void step(Swarm& swarm, LossProvider& provider, const SweepLossFn& loss,
          const PsoConfig& cfg);

/// True when at least density_fraction of particles lie within
/// density_radius of the global best. Requires a completed iteration.
bool check_convergence(const Swarm& swarm, const PsoConfig& cfg);

struct CalibrationResult {
  BiasField best_field{};
  double best_loss = 0.0;
  bool converged = false;
  /// Evaluation passes performed (each costs n_particles sweeps).
  int iterations = 0;
  std::vector<IterationRecord> history;
};

/// Full search loop: evaluation passes alternate with swarm moves until the
/// density criterion is met or max_iterations passes are spent.
/// max_iterations == 0 still performs the initial evaluation pass and
/// reports converged = false.
CalibrationResult calibrate(const PsoConfig& cfg, LossProvider& provider,
                            const SweepLossFn& loss);

}  // namespace nvcalib
