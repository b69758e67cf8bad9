#include "nvcalib/physics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "nvcalib/rng.hpp"

namespace nvcalib {

Mat3 rotation_between(const Vec3& from, const Vec3& to) {
  const Vec3 a = from.normalized();
  const Vec3 b = to.normalized();
  const Vec3 v = a.cross(b);
  const double c = a.dot(b);
  if (c < -1.0 + 1e-12)
    throw std::invalid_argument(
        "rotation_between: antiparallel vectors have no unique minimal "
        "rotation");
  const double k = 1.0 / (1.0 + c);
  Mat3 r{};
  r.m = {c + v.x * v.x * k,  v.x * v.y * k - v.z, v.x * v.z * k + v.y,
         v.y * v.x * k + v.z, c + v.y * v.y * k,  v.y * v.z * k - v.x,
         v.z * v.x * k - v.y, v.z * v.y * k + v.x, c + v.z * v.z * k};
  return r;
}

double Constants::cos_half_theta() const {
  return std::cos(0.5 * theta_tet_rad);
}

void Constants::validate() const {
  if (!(d_hz > 0.0) || !(gamma_e_hz_per_t > 0.0) || !(delta_hf_hz > 0.0) ||
      !(theta_tet_rad > 0.0) || !(g_e > 0.0) || !(mu_b_j_per_t > 0.0) ||
      !(h_j_s > 0.0) || !(p_f > 0.0))
    throw std::invalid_argument("constants must all be positive");
  const double gamma_from_g = g_e * mu_b_j_per_t / h_j_s;
  if (std::abs(gamma_from_g - gamma_e_hz_per_t) >
      0.005 * gamma_e_hz_per_t)
    throw std::invalid_argument(
        "gamma_e inconsistent with g_e*mu_B/h beyond 0.5%");
  const double inv_sqrt3 = 1.0 / std::sqrt(3.0);
  if (std::abs(cos_half_theta() - inv_sqrt3) > 1e-6)
    throw std::invalid_argument(
        "cos(theta_tet/2) must equal 1/sqrt(3) within 1e-6");
}

void BiasField::validate(double max_abs_t) const {
  if (!std::isfinite(bx_t) || !std::isfinite(by_t) || !std::isfinite(bz_t))
    throw std::invalid_argument("bias field components must be finite");
  if (std::abs(bx_t) > max_abs_t || std::abs(by_t) > max_abs_t ||
      std::abs(bz_t) > max_abs_t)
    throw std::invalid_argument("bias field component out of range");
}

NVAxes NVAxes::canonical() {
  const double s = 1.0 / std::sqrt(3.0);
  return NVAxes{{Vec3{s, s, s}, Vec3{s, -s, -s}, Vec3{-s, s, -s},
                 Vec3{-s, -s, s}}};
}

NVAxes NVAxes::rotated(const Mat3& r) {
  NVAxes base = canonical();
  NVAxes out{};
  for (int i = 0; i < 4; ++i) out.axes[i] = r.apply(base.axes[i]);
  return out;
}

NVAxes NVAxes::aligned_to(const Vec3& target) {
  // A rotation q that carries the target direction onto a cube axis of the
  // canonical lattice makes all four projections equal; the crystal frame
  // is then the inverse of q applied to the canonical axes.
  const Mat3 q = rotation_between(target, Vec3{1.0, 0.0, 0.0});
  return rotated(q.transpose());
}

void NVAxes::validate() const {
  for (const auto& a : axes)
    if (std::abs(a.norm() - 1.0) > 1e-9)
      throw std::invalid_argument("orientation axes must be unit vectors");
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      // Angles are compared modulo sign: +/-u describe the same NV axis.
      const double c = std::abs(axes[i].dot(axes[j]));
      if (std::abs(c - 1.0 / 3.0) > 1e-6)
        throw std::invalid_argument(
            "orientation axes must make tetrahedral angles");
    }
}

void SpectrumModel::validate() const {
  constants.validate();
  if (!(f0_v > 0.0))
    throw std::invalid_argument("background level must be positive");
  if (!(contrast > 0.0) || contrast > 1.0 / 12.0)
    throw std::invalid_argument(
        "per-line contrast must lie in (0, 1/12]: twelve lines must not "
        "exceed the background");
  if (!(linewidth_hz > 0.0))
    throw std::invalid_argument("linewidth must be positive");
}

void NoiseModel::validate() const {
  if (!(white_density_v_rthz >= 0.0) || !(electronic_floor_v_rthz >= 0.0))
    throw std::invalid_argument("noise densities must be non-negative");
  for (const auto& [f, a] : mains_lines_hz_v)
    if (!(f > 0.0) || !(a >= 0.0))
      throw std::invalid_argument("mains tones need f > 0 and amplitude >= 0");
}

void LockinSettings::validate(double linewidth_hz) const {
  if (!(mod_depth_hz > 0.0))
    throw std::invalid_argument("modulation depth must be positive");
  if (mod_depth_hz >= 10.0 * linewidth_hz)
    throw std::invalid_argument(
        "modulation depth of 10 linewidths or more is outside the model's "
        "validity");
  if (phase_samples < 32)
    throw std::invalid_argument("demodulation needs at least 32 phase samples");
  if (!(output_gain > 0.0))
    throw std::invalid_argument("output gain must be positive");
}

void Sweep::validate() const {
  if (freqs_hz.size() != values_v.size())
    throw std::invalid_argument("sweep arrays must have equal length");
  if (freqs_hz.size() < 3)
    throw std::invalid_argument("sweep needs at least 3 points");
  for (std::size_t i = 1; i < freqs_hz.size(); ++i)
    if (!(freqs_hz[i] > freqs_hz[i - 1]))
      throw std::invalid_argument("sweep grid must be strictly increasing");
}

std::array<double, 4> project_field(const BiasField& b, const NVAxes& axes) {
  const Vec3 v = b.vec();
  std::array<double, 4> out{};
  for (int i = 0; i < 4; ++i) out[i] = std::abs(v.dot(axes.axes[i]));
  return out;
}

std::array<double, 4> resonance_centers(const BiasField& b,
                                        const Constants& c,
                                        const NVAxes& axes) {
  const auto proj = project_field(b, axes);
  std::array<double, 4> out{};
  for (int i = 0; i < 4; ++i) out[i] = c.d_hz + c.gamma_e_hz_per_t * proj[i];
  return out;
}

double cw_value(const SpectrumModel& m, const std::array<double, 4>& proj_t,
                double freq_hz) {
  const double hw = 0.5 * m.linewidth_hz;
  const double hw2 = hw * hw;
  const double base = freq_hz - m.constants.d_hz;
  double dips = 0.0;
  for (const double b : proj_t) {
    const double detune = base - m.constants.gamma_e_hz_per_t * b;
    for (int j = -1; j <= 1; ++j) {
      const double d = detune + j * m.constants.delta_hf_hz;
      dips += hw2 / (hw2 + d * d);
    }
  }
  return m.f0_v * (1.0 - m.contrast * dips);
}

namespace {

void check_grid(const std::vector<double>& freqs) {
  if (freqs.size() < 3)
    throw std::invalid_argument("spectrum grid needs at least 3 points");
  for (std::size_t i = 1; i < freqs.size(); ++i)
    if (!(freqs[i] > freqs[i - 1]))
      throw std::invalid_argument("spectrum grid must be strictly increasing");
}

}  // namespace

Sweep cw_spectrum(const SpectrumModel& m, const BiasField& b,
                  std::vector<double> freqs_hz, const NVAxes& axes) {
  m.validate();
  check_grid(freqs_hz);
  const auto proj = project_field(b, axes);
  Sweep s;
  s.values_v.reserve(freqs_hz.size());
  for (const double f : freqs_hz) s.values_v.push_back(cw_value(m, proj, f));
  s.freqs_hz = std::move(freqs_hz);
  s.meta.field = b;
  s.meta.mode = "cw";
  return s;
}

Sweep lockin_spectrum(const SpectrumModel& m, const BiasField& b,
                      std::vector<double> freqs_hz, const LockinSettings& s,
                      const NVAxes& axes) {
  m.validate();
  s.validate(m.linewidth_hz);
  check_grid(freqs_hz);
  const auto proj = project_field(b, axes);

  const int n = s.phase_samples;
  std::vector<double> sin_phi(n);
  for (int k = 0; k < n; ++k)
    sin_phi[k] = std::sin(2.0 * std::numbers::pi * k / n);

  const double hf = m.constants.delta_hf_hz;
  const std::array<double, 3> offsets{-hf, 0.0, hf};
  const int n_tones = s.three_tone ? 3 : 1;
  const double tone_scale =
      (s.three_tone && s.tone_norm == LockinSettings::ToneNorm::average)
          ? 1.0 / 3.0
          : 1.0;

  Sweep out;
  out.values_v.reserve(freqs_hz.size());
  for (const double f : freqs_hz) {
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      if (sin_phi[k] == 0.0) continue;
      const double fk = f + s.mod_depth_hz * sin_phi[k];
      double v = 0.0;
      if (s.three_tone) {
        for (int t = 0; t < n_tones; ++t)
          v += cw_value(m, proj, fk + offsets[t]);
      } else {
        v = cw_value(m, proj, fk);
      }
      acc += v * tone_scale * sin_phi[k];
    }
    out.values_v.push_back(s.output_gain * 2.0 * acc / n);
  }
  out.freqs_hz = std::move(freqs_hz);
  out.meta.field = b;
  out.meta.mode = "lockin";
  out.meta.mod_depth_hz = s.mod_depth_hz;
  out.meta.three_tone = s.three_tone;
  return out;
}

std::vector<double> synth_timetrace(double slope_v_per_t,
                                    std::span<const double> field_signal_t,
                                    const NoiseModel& noise, double fs_hz,
                                    double duration_s, std::uint64_t seed) {
  noise.validate();
  if (!(fs_hz > 0.0) || !(duration_s > 0.0))
    throw std::invalid_argument("sampling rate and duration must be positive");
  const auto n = static_cast<std::size_t>(std::llround(fs_hz * duration_s));
  if (n < 8)
    throw std::invalid_argument("record must span at least 8 samples");
  if (!field_signal_t.empty() && field_signal_t.size() != n)
    throw std::invalid_argument(
        "field signal length must match the record length");

  Rng rng(seed);
  // Tone phases are drawn before the sample loop so the gaussian stream
  // stays aligned regardless of how many tones are configured.
  struct Tone {
    double omega;
    double phase;
    double amp;
  };
  std::vector<Tone> tones;
  tones.reserve(noise.mains_lines_hz_v.size());
  for (const auto& [f, a] : noise.mains_lines_hz_v)
    tones.push_back({2.0 * std::numbers::pi * f / fs_hz,
                     rng.uniform(0.0, 2.0 * std::numbers::pi), a});

  // White and electronic-floor noise are independent gaussians; one draw
  // with the quadrature-summed density is distributed identically.
  const double density = std::hypot(noise.white_density_v_rthz,
                                    noise.electronic_floor_v_rthz);
  const double sigma = density * std::sqrt(fs_hz / 2.0);

  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double v = sigma * rng.gaussian();
    for (const auto& t : tones)
      if (t.amp != 0.0) v += t.amp * std::sin(t.omega * i + t.phase);
    if (!field_signal_t.empty()) v += slope_v_per_t * field_signal_t[i];
    out[i] = v;
  }
  return out;
}

}  // namespace nvcalib
