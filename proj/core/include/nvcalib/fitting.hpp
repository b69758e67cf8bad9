#pragma once

#include <array>
#include <optional>

#include "nvcalib/physics.hpp"

namespace nvcalib {

/// Result of fitting one hyperfine triplet of Lorentzian dips.
struct TripletFit {
  /// Line centers in ascending order, Hz.
  std::array<double, 3> centers_hz{};
  /// FWHM per line, Hz.
  std::array<double, 3> linewidths_hz{};
  /// Fractional dip depth per line relative to the baseline.
  std::array<double, 3> contrasts{};
  double baseline_v = 0.0;
  double residual_rms_v = 0.0;
  bool converged = false;
};

struct TripletFitOptions {
  int max_iterations = 200;
  /// Nominal hyperfine spacing, Hz; fitted spacings are constrained to
  /// spacing_hz * (1 +/- spacing_tolerance).
  double spacing_hz = 2.16e6;
  double spacing_tolerance = 0.10;
  /// Initial FWHM guess, Hz.
  double init_linewidth_hz = 500e3;
  /// A fit is declared non-converged when the residual RMS exceeds this
  /// fraction of the fitted dip depth.
  double residual_depth_fraction = 0.10;
  /// Tie all three lines to one linewidth. Hyperfine sublines share their
  /// physical broadening, so this is the right model whenever the question
  /// is "how wide is this feature" rather than "how do the sublines
  /// differ"; it also denies a misfit the freedom to sharpen one line by
  /// leaning it against an artificially broadened sibling.
  bool shared_linewidth = false;
};

/// Fit three equally-spaced-ish Lorentzian dips to a swept spectrum with a
/// damped least-squares solver. Initial values come from `init` when given,
/// otherwise the central line is located by correlating the sweep against a
/// triplet-shaped template, which survives noise that would mislead a raw
/// deepest-sample pick. Throws FitDegenerate when no dip in the sweep
/// exceeds three times the sample noise estimate.
TripletFit fit_triplet(const Sweep& sweep,
                       const std::optional<TripletFit>& init = std::nullopt,
                       const TripletFitOptions& options = {});

/// Value of the fitted model at one frequency: baseline minus the three
/// Lorentzian dips. Useful for residual inspection and plotting.
double triplet_model_value(const TripletFit& fit, double f_hz);

/// Objective used by the bias-field search: the reciprocal linewidth of the
/// central fitted line, 1/Hz. Sharper central features score higher.
/// Requires a converged fit.
double central_loss(const TripletFit& fit);

/// Result of a linear fit through a lock-in zero crossing.
struct SlopeFit {
  double zero_crossing_hz = 0.0;
  double slope_v_per_hz = 0.0;
  double window_lo_hz = 0.0;
  double window_hi_hz = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares through the samples of `sweep` within
/// center_hint +/- half_window. The window must contain a sign change;
/// otherwise NoCrossing is thrown.
SlopeFit fit_zero_crossing(const Sweep& sweep, double center_hint_hz,
                           double half_window_hz);

/// Convert a lock-in frequency slope to a magnetic response, V/T.
/// Separated features respond with the full gyromagnetic ratio; a fully
/// overlapped feature picks up the cos(theta_tet/2) = 1/sqrt(3) projection
/// factor of a field applied along a cube axis of the lattice.
double slope_to_field_response(double slope_v_per_hz, const Constants& c,
                               bool overlapped);

namespace detail {
/// Robust noise scale from successive differences, for degeneracy checks.
double noise_estimate(const std::vector<double>& values);
}  // namespace detail

}  // namespace nvcalib
