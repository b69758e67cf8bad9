#include "nvcalib/fitting.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "nvcalib/errors.hpp"

namespace nvcalib {

namespace detail {

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 0) {
    std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
    return 0.5 * (v[mid - 1] + hi);
  }
  return hi;
}

}  // namespace

double noise_estimate(const std::vector<double>& values) {
  // Scaled median absolute deviation of successive differences. The smooth
  // spectral shape contributes little to the median, so this tracks the
  // additive noise scale and is exactly zero for noiseless data.
  if (values.size() < 3) return 0.0;
  std::vector<double> d(values.size() - 1);
  for (std::size_t i = 0; i + 1 < values.size(); ++i)
    d[i] = values[i + 1] - values[i];
  const double med = median_of(d);
  std::vector<double> dev(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) dev[i] = std::abs(d[i] - med);
  return 1.4826 * median_of(dev) / std::sqrt(2.0);
}

}  // namespace detail

namespace {

// Parameter layout of the triplet model
//   value(f) = b0 * (1 - sum_k a_k * hw_k^2 / (hw_k^2 + (f - mu_k)^2))
// with mu = {mu_c - s_l, mu_c, mu_c + s_r} and hw_k = w_k / 2. With
// independent linewidths:
//   p = [b0, mu_c, s_l, s_r, w1, w2, w3, a1, a2, a3]
// With a shared linewidth the three width slots collapse into one:
//   p = [b0, mu_c, s_l, s_r, w, a1, a2, a3]
constexpr int kMaxParams = 10;
using Params = std::array<double, kMaxParams>;

int param_count(bool shared) { return shared ? 8 : 10; }
int width_index(int k, bool shared) { return shared ? 4 : 4 + k; }
int contrast_index(int k, bool shared) { return shared ? 5 + k : 7 + k; }

struct Bounds {
  Params lo{};
  Params hi{};
};

std::array<double, 3> line_centers(const Params& p) {
  return {p[1] - p[2], p[1], p[1] + p[3]};
}

double model_value(const Params& p, bool shared, double f) {
  const auto mu = line_centers(p);
  double dips = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double hw = 0.5 * p[width_index(k, shared)];
    const double d = f - mu[k];
    dips += p[contrast_index(k, shared)] * hw * hw / (hw * hw + d * d);
  }
  return p[0] * (1.0 - dips);
}

void model_jacobian_row(const Params& p, bool shared, double f, double* row) {
  const auto mu = line_centers(p);
  for (int i = 0; i < param_count(shared); ++i) row[i] = 0.0;
  double dips = 0.0;
  double dmu[3];
  for (int k = 0; k < 3; ++k) {
    const double hw = 0.5 * p[width_index(k, shared)];
    const double a = p[contrast_index(k, shared)];
    const double d = f - mu[k];
    const double den = hw * hw + d * d;
    const double lorentz = hw * hw / den;
    dips += a * lorentz;
    row[contrast_index(k, shared)] = -p[0] * lorentz;
    dmu[k] = -p[0] * a * 2.0 * hw * hw * d / (den * den);
    // Shared layout accumulates all three lines into the one width slot.
    row[width_index(k, shared)] += -p[0] * a * hw * d * d / (den * den);
  }
  row[0] = 1.0 - dips;                    // d/d b0
  row[1] = dmu[0] + dmu[1] + dmu[2];      // d/d mu_c
  row[2] = -dmu[0];                       // d/d s_l
  row[3] = dmu[2];                        // d/d s_r
}

double sse_of(const Params& p, bool shared, const Sweep& s) {
  double sse = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double r = s.values_v[i] - model_value(p, shared, s.freqs_hz[i]);
    sse += r * r;
  }
  return sse;
}

Params clamp_params(Params p, const Bounds& b, bool shared) {
  for (int i = 0; i < param_count(shared); ++i)
    p[i] = std::clamp(p[i], b.lo[i], b.hi[i]);
  return p;
}

}  // namespace

TripletFit fit_triplet(const Sweep& sweep,
                       const std::optional<TripletFit>& init,
                       const TripletFitOptions& options) {
  sweep.validate();
  if (options.max_iterations < 1 ||
      !(options.spacing_hz > 0.0) ||
      !(options.spacing_tolerance > 0.0) || options.spacing_tolerance >= 1.0 ||
      !(options.init_linewidth_hz > 0.0) ||
      !(options.residual_depth_fraction > 0.0))
    throw std::invalid_argument("bad triplet fit options");
  const bool shared = options.shared_linewidth;
  const int np = param_count(shared);
  const std::size_t n = sweep.size();
  const double span = sweep.freqs_hz.back() - sweep.freqs_hz.front();
  if (span < 3.0 * options.spacing_hz)
    throw std::invalid_argument(
        "sweep must span at least three hyperfine spacings");
  if (n < static_cast<std::size_t>(np) + 2)
    throw std::invalid_argument("too few samples to constrain the model");

  // Degeneracy gate: the deepest dip must rise above the noise.
  const double sigma = detail::noise_estimate(sweep.values_v);
  std::vector<double> sorted = sweep.values_v;
  std::sort(sorted.begin(), sorted.end());
  const double baseline_est = sorted[sorted.size() / 2];
  const double vmin = sorted.front();
  const double depth_est = baseline_est - vmin;
  if (depth_est <= 3.0 * sigma)
    throw FitDegenerate("no dip exceeds three times the noise estimate");

  Bounds b;
  const double s_lo = options.spacing_hz * (1.0 - options.spacing_tolerance);
  const double s_hi = options.spacing_hz * (1.0 + options.spacing_tolerance);
  b.lo[0] = 1e-12 * std::max(baseline_est, 1e-30);
  b.hi[0] = 4.0 * std::max(baseline_est, vmin + depth_est);
  b.lo[1] = sweep.freqs_hz.front();
  b.hi[1] = sweep.freqs_hz.back();
  b.lo[2] = b.lo[3] = s_lo;
  b.hi[2] = b.hi[3] = s_hi;
  for (int k = 0; k < 3; ++k) {
    b.lo[width_index(k, shared)] = 1.0;
    b.hi[width_index(k, shared)] = span;
    b.lo[contrast_index(k, shared)] = 0.0;
    b.hi[contrast_index(k, shared)] = 0.45;
  }

  Params p{};
  if (init) {
    p[0] = init->baseline_v;
    p[1] = init->centers_hz[1];
    p[2] = init->centers_hz[1] - init->centers_hz[0];
    p[3] = init->centers_hz[2] - init->centers_hz[1];
    for (int k = 0; k < 3; ++k) {
      p[width_index(k, shared)] = init->linewidths_hz[k];
      p[contrast_index(k, shared)] = init->contrasts[k];
    }
    if (shared)
      p[4] = (init->linewidths_hz[0] + init->linewidths_hz[1] +
              init->linewidths_hz[2]) /
             3.0;
  } else {
    // Matched-filter pick of the central line: correlate the dip profile
    // against a triplet of Lorentzians at the nominal spacing. The raw
    // deepest sample falls for single noise spikes on an outer line; the
    // template integrates every sample of all three lines, so shifting the
    // assignment by one spacing forfeits a whole line of overlap, which
    // noise cannot make up at any workable SNR.
    const double hw0 = 0.5 * options.init_linewidth_hz;
    std::size_t ibest = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      double score = 0.0;
      for (std::size_t m = 0; m < n; ++m) {
        const double base_d = sweep.freqs_hz[m] - sweep.freqs_hz[i];
        double t = 0.0;
        for (int j = -1; j <= 1; ++j) {
          const double d = base_d - j * options.spacing_hz;
          t += hw0 * hw0 / (hw0 * hw0 + d * d);
        }
        score += t * (baseline_est - sweep.values_v[m]);
      }
      if (score > best_score) {
        best_score = score;
        ibest = i;
      }
    }
    p[0] = baseline_est;
    p[1] = sweep.freqs_hz[ibest];
    p[2] = options.spacing_hz;
    p[3] = options.spacing_hz;
    const double depth_frac = depth_est / std::max(baseline_est, 1e-30);
    for (int k = 0; k < 3; ++k) {
      p[width_index(k, shared)] = options.init_linewidth_hz;
      p[contrast_index(k, shared)] = depth_frac / 3.0;
    }
  }
  p = clamp_params(p, b, shared);

  // Damped least squares with multiplicative damping on diag(J^T J), which
  // keeps the step well scaled across parameters of very different
  // magnitude. Steps are projected into the bounds box.
  double sse = sse_of(p, shared, sweep);
  double lambda = 1e-3;
  bool stalled = false;
  int iter = 0;
  Eigen::MatrixXd jac(n, np);
  Eigen::VectorXd res(n);
  for (; iter < options.max_iterations; ++iter) {
    double row[kMaxParams];
    for (std::size_t i = 0; i < n; ++i) {
      model_jacobian_row(p, shared, sweep.freqs_hz[i], row);
      for (int k = 0; k < np; ++k) jac(i, k) = row[k];
      res(i) = sweep.values_v[i] - model_value(p, shared, sweep.freqs_hz[i]);
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * res;

    bool accepted = false;
    for (int tries = 0; tries < 25 && !accepted; ++tries) {
      Eigen::MatrixXd damped = jtj;
      for (int k = 0; k < np; ++k)
        damped(k, k) += lambda * std::max(jtj(k, k), 1e-30);
      const Eigen::VectorXd delta = damped.ldlt().solve(jtr);
      Params cand = p;
      for (int k = 0; k < np; ++k) cand[k] += delta(k);
      cand = clamp_params(cand, b, shared);
      const double cand_sse = sse_of(cand, shared, sweep);
      if (cand_sse < sse) {
        double max_rel_step = 0.0;
        for (int k = 0; k < np; ++k)
          max_rel_step =
              std::max(max_rel_step, std::abs(cand[k] - p[k]) /
                                         (std::abs(p[k]) + 1e-30));
        const double drop = sse - cand_sse;
        p = cand;
        sse = cand_sse;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        // Stall well below the 1e-9 relative tolerance the fit advertises,
        // so runs that differ only by float rounding (e.g. a scaled copy of
        // the same sweep) land within it of each other.
        if (drop <= 1e-13 * std::max(sse, 1e-300) && max_rel_step <= 1e-12)
          stalled = true;
      } else {
        lambda *= 4.0;
        if (lambda > 1e12) break;
      }
    }
    if (!accepted || stalled) break;
  }

  TripletFit fit;
  const auto mu = line_centers(p);
  for (int k = 0; k < 3; ++k) {
    fit.centers_hz[k] = mu[k];
    fit.linewidths_hz[k] = p[width_index(k, shared)];
    fit.contrasts[k] = p[contrast_index(k, shared)];
  }
  fit.baseline_v = p[0];
  fit.residual_rms_v = std::sqrt(sse / static_cast<double>(n));
  const double depth =
      p[0] * std::max({fit.contrasts[0], fit.contrasts[1], fit.contrasts[2]});
  fit.converged = iter < options.max_iterations && depth > 0.0 &&
                  fit.residual_rms_v <=
                      options.residual_depth_fraction * depth;
  return fit;
}

double triplet_model_value(const TripletFit& fit, double f_hz) {
  double dips = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double hw = 0.5 * fit.linewidths_hz[k];
    const double d = f_hz - fit.centers_hz[k];
    dips += fit.contrasts[k] * hw * hw / (hw * hw + d * d);
  }
  return fit.baseline_v * (1.0 - dips);
}

double central_loss(const TripletFit& fit) {
  if (!fit.converged)
    throw std::invalid_argument("central_loss requires a converged fit");
  return 1.0 / fit.linewidths_hz[1];
}

SlopeFit fit_zero_crossing(const Sweep& sweep, double center_hint_hz,
                           double half_window_hz) {
  sweep.validate();
  if (!(half_window_hz > 0.0))
    throw std::invalid_argument("half window must be positive");

  const double lo = center_hint_hz - half_window_hz;
  const double hi = center_hint_hz + half_window_hz;
  std::vector<double> fs, vs;
  for (std::size_t i = 0; i < sweep.size(); ++i)
    if (sweep.freqs_hz[i] >= lo && sweep.freqs_hz[i] <= hi) {
      fs.push_back(sweep.freqs_hz[i]);
      vs.push_back(sweep.values_v[i]);
    }
  if (fs.size() < 2) throw NoCrossing("window holds fewer than two samples");

  bool crossing = false;
  for (std::size_t i = 0; i + 1 < vs.size() && !crossing; ++i)
    crossing = vs[i] == 0.0 || vs[i] * vs[i + 1] < 0.0;
  crossing = crossing || vs.back() == 0.0;
  if (!crossing) throw NoCrossing("window contains no sign change");

  // Least squares in coordinates centered on the hint for conditioning.
  const double n = static_cast<double>(fs.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const double x = fs[i] - center_hint_hz;
    sx += x;
    sy += vs[i];
    sxx += x * x;
    sxy += x * vs[i];
  }
  const double det = n * sxx - sx * sx;
  if (det == 0.0) throw NoCrossing("degenerate sample layout");
  const double slope = (n * sxy - sx * sy) / det;
  const double intercept = (sy - slope * sx) / n;
  if (slope == 0.0) throw NoCrossing("flat window");

  SlopeFit fit;
  fit.slope_v_per_hz = slope;
  fit.zero_crossing_hz = center_hint_hz - intercept / slope;
  fit.window_lo_hz = fs.front();
  fit.window_hi_hz = fs.back();
  if (!(fit.window_lo_hz < fit.zero_crossing_hz &&
        fit.zero_crossing_hz < fit.window_hi_hz))
    throw NoCrossing("regression crossing falls outside the window");

  double ss_res = 0.0, ss_tot = 0.0;
  const double mean = sy / n;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const double pred = intercept + slope * (fs[i] - center_hint_hz);
    ss_res += (vs[i] - pred) * (vs[i] - pred);
    ss_tot += (vs[i] - mean) * (vs[i] - mean);
  }
  fit.r_squared =
      ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
  return fit;
}

double slope_to_field_response(double slope_v_per_hz, const Constants& c,
                               bool overlapped) {
  c.validate();
  if (!std::isfinite(slope_v_per_hz))
    throw std::invalid_argument("slope must be finite");
  const double projection = overlapped ? c.cos_half_theta() : 1.0;
  return slope_v_per_hz * c.gamma_e_hz_per_t * projection;
}

}  // namespace nvcalib
