// Acceptance gate: one line per criterion, [PASS]/[FAIL] with timing.
// Exit code is the number of failed criteria, so ctest treats any red
// line as a test failure.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "nvcalib/config.hpp"
#include "nvcalib/errors.hpp"
#include "nvcalib/fitting.hpp"
#include "nvcalib/physics.hpp"
#include "nvcalib/protocol.hpp"
#include "nvcalib/provider.hpp"
#include "nvcalib/pso.hpp"
#include "nvcalib/rng.hpp"
#include "nvcalib/sensitivity.hpp"
#include "nvcalib/workflows.hpp"
#include "support/helpers.hpp"

using namespace nvcalib;

namespace {

bool close_rel(double value, double expected, double tol) {
  return std::abs(value - expected) <= tol * std::abs(expected);
}

// ---------------------------------------------------------------- C1
bool slope_conversions(std::string& detail) {
  Constants c;
  const double sep = slope_to_field_response(0.148e-6, c, false);
  const double ovl_axis = slope_to_field_response(0.476e-6, c, false);
  const double ovl_proj = slope_to_field_response(0.476e-6, c, true);
  std::ostringstream os;
  os << sep * 1e-9 * 1e6 << " / " << ovl_axis * 1e-9 * 1e6 << " / "
     << ovl_proj * 1e-9 * 1e6 << " uV/nT";
  detail = os.str();
  return close_rel(sep, 4.14e-6 * 1e9, 0.005) &&
         close_rel(ovl_axis, 13.3e-6 * 1e9, 0.005) &&
         close_rel(ovl_proj, 7.68e-6 * 1e9, 0.005);
}

// ---------------------------------------------------------------- C2
bool sensitivity_quotients(std::string& detail) {
  Constants c;
  const double resp_sep = slope_to_field_response(0.148e-6, c, false);
  const double resp_ovl = slope_to_field_response(0.476e-6, c, true);
  const double eta_sep = field_sensitivity(5.50e-6, resp_sep);
  const double eta_ovl = field_sensitivity(6.58e-6, resp_ovl);
  const double floor_sep = field_sensitivity(254e-9, resp_sep);
  const double floor_ovl = field_sensitivity(265e-9, resp_ovl);
  std::ostringstream os;
  os << eta_sep * 1e9 << " nT, " << eta_ovl * 1e12 << " pT; floors "
     << floor_sep * 1e12 << " / " << floor_ovl * 1e12 << " pT";
  detail = os.str();
  return close_rel(eta_sep, 1.33e-9, 0.01) &&
         close_rel(eta_ovl, 855e-12, 0.01) &&
         close_rel(floor_sep, 61e-12, 0.03) &&
         close_rel(floor_ovl, 35e-12, 0.03);
}

// ---------------------------------------------------------------- C3
bool enhancement_pipeline(std::string& detail) {
  const EnhancementReport rep = run_enhancement(default_config());
  std::ostringstream os;
  os << "enhancement " << rep.enhancement << " ("
     << rep.separated.report.field_sensitivity_t_rthz * 1e9 << " / "
     << rep.overlapped.report.field_sensitivity_t_rthz * 1e12 << ")";
  detail = os.str();
  return rep.enhancement >= 1.45 && rep.enhancement <= 1.65;
}

// ---------------------------------------------------------------- C4
bool field_configurations(std::string& detail) {
  RunConfig cfg = default_config();
  const NVAxes axes = simulator_axes(cfg);

  // Overlapped bias: all four projections coincide and the central
  // hyperfine line sits at the published crossing.
  const BiasField ovl = cfg.sensitivity.overlapped.field;
  const auto proj = project_field(ovl, axes);
  double pmin = proj[0], pmax = proj[0];
  for (const double p : proj) {
    pmin = std::min(pmin, p);
    pmax = std::max(pmax, p);
  }
  // The projection spread, expressed as a frequency, must be far below
  // anything a line fit could resolve.
  const bool projections_equal =
      (pmax - pmin) * cfg.constants.gamma_e_hz_per_t < 1e3;

  RunConfig quiet = cfg;
  quiet.noise = NoiseModel{};
  auto provider = make_simulator(quiet);
  SweepRequest req;
  req.f_start_hz = cfg.calibration.sweep.f_start_hz;
  req.f_stop_hz = cfg.calibration.sweep.f_stop_hz;
  req.n_points = cfg.calibration.sweep.n_points;
  req.field = ovl;
  const Sweep sweep = provider->acquire(req);
  std::size_t imin = 0;
  for (std::size_t i = 1; i < sweep.size(); ++i)
    if (sweep.values_v[i] < sweep.values_v[imin]) imin = i;
  Sweep local;
  for (std::size_t i = 0; i < sweep.size(); ++i)
    if (std::abs(sweep.freqs_hz[i] - sweep.freqs_hz[imin]) <= 5e6) {
      local.freqs_hz.push_back(sweep.freqs_hz[i]);
      local.values_v.push_back(sweep.values_v[i]);
    }
  const TripletFit fit = fit_triplet(local);
  const bool central_ok =
      fit.converged && std::abs(fit.centers_hz[1] - 2904e6) <= 1e6;

  // Separated bias: at least four resolved orientation groups.
  SweepRequest wide;
  wide.field = cfg.sensitivity.separated.field;
  auto noisy = make_simulator(cfg);
  const Sweep survey = noisy->acquire(wide);
  const int groups = testsupport::count_groups(survey, 0.0025, 4 * 2.16e6);

  std::ostringstream os;
  os << "spread " << (pmax - pmin) * cfg.constants.gamma_e_hz_per_t
     << " Hz, central " << fit.centers_hz[1] / 1e6 << " MHz, " << groups
     << " groups";
  detail = os.str();
  return projections_equal && central_ok && groups >= 4;
}

// ---------------------------------------------------------------- C5
bool lineshape_identity(std::string& detail) {
  SpectrumModel m;
  m.f0_v = 2.0;
  m.contrast = 0.0051;
  m.linewidth_hz = 550e3;
  const BiasField b{2.12e-3, -0.016e-3, -0.070e-3};
  const NVAxes axes = NVAxes::aligned_to(b.vec());

  const double pr = b.norm_t() / std::sqrt(3.0);
  const double center = m.constants.d_hz + m.constants.gamma_e_hz_per_t * pr;
  const double h = 0.5 * m.linewidth_hz;

  std::vector<double> freqs(10000);
  for (std::size_t i = 0; i < freqs.size(); ++i)
    freqs[i] = center - 25e6 + 50e6 * static_cast<double>(i) / 9999.0;
  const Sweep sum4 = cw_spectrum(m, b, freqs, axes);

  double worst = 0.0;
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    double dips = 0.0;
    for (int j = -1; j <= 1; ++j) {
      const double d = freqs[i] - (center + j * m.constants.delta_hf_hz);
      dips += 4.0 * m.contrast * h * h / (h * h + d * d);
    }
    const double reference = m.f0_v * (1.0 - dips);
    worst = std::max(worst, std::abs(sum4.values_v[i] - reference));
  }
  std::ostringstream os;
  os << "max deviation " << worst / m.f0_v << " of F0 over 10000 points";
  detail = os.str();
  return worst < 1e-12 * m.f0_v;
}

// ---------------------------------------------------------------- C6
bool swarm_search(std::string& detail) {
  int hits = 0;
  bool monotone = true;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    RunConfig cfg = default_config();
    cfg.seed = seed;
    auto provider = make_provider(cfg);
    const CalibrationResult r = run_calibration(cfg, *provider);
    const BiasField truth = *cfg.provider.overlap_truth;
    const double dist = std::hypot(r.best_field.by_t - truth.by_t,
                                   r.best_field.bz_t - truth.bz_t);
    if (dist <= 0.02e-3) ++hits;
    for (std::size_t i = 1; i < r.history.size(); ++i)
      if (r.history[i].g_best_loss < r.history[i - 1].g_best_loss)
        monotone = false;
  }
  std::ostringstream os;
  os << hits << "/10 within 0.02 mT, g_best monotone: "
     << (monotone ? "yes" : "no");
  detail = os.str();
  return hits >= 8 && monotone;
}

// ---------------------------------------------------------------- C7
bool fit_recovery(std::string& detail) {
  const double center = 2.9043e9;
  const double spacing = 2.16e6;
  const std::array<std::pair<double, double>, 3> pairs{
      {{893e3, 0.0155}, {688e3, 0.0215}, {516e3, 0.0222}}};
  std::ostringstream os;
  bool ok = true;
  // 30 kHz pitch and one shared linewidth: the Cramer-Rao bound for this
  // model at SNR 20 is 1.2-1.6% on the linewidth, putting the 5% gate at
  // about three sigma. The coarser 120 kHz survey pitch bounds the same
  // uncertainty at 2.4-3.3%, where no estimator could hold the gate.
  TripletFitOptions fit_opt;
  fit_opt.shared_linewidth = true;
  for (const auto& [lw, contrast] : pairs) {
    int good = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
      Sweep s;
      Rng rng(seed);
      const double sigma = contrast / 20.0;  // SNR 20 on a unit baseline
      for (double f = center - 8e6; f <= center + 8e6 + 15e3; f += 30e3) {
        double dips = 0.0;
        for (int j = -1; j <= 1; ++j) {
          const double hw = 0.5 * lw;
          const double d = f - (center + j * spacing);
          dips += contrast * hw * hw / (hw * hw + d * d);
        }
        s.freqs_hz.push_back(f);
        s.values_v.push_back(1.0 - dips + sigma * rng.gaussian());
      }
      try {
        const TripletFit fit = fit_triplet(s, std::nullopt, fit_opt);
        bool pass = fit.converged;
        for (int j = 0; j < 3 && pass; ++j)
          pass = close_rel(fit.linewidths_hz[j], lw, 0.05) &&
                 close_rel(fit.contrasts[j], contrast, 0.05) &&
                 std::abs(fit.centers_hz[j] - (center + (j - 1) * spacing)) <=
                     spacing / 20.0;
        if (pass) ++good;
      } catch (const FitDegenerate&) {
      }
    }
    os << good << "/50 ";
    if (good < 45) ok = false;
  }
  detail = os.str() + "recovered";
  return ok;
}

// ---------------------------------------------------------------- C8
bool noise_bandwidth(std::string& detail) {
  const double pinned = enbw_fourth_order(1e-3);
  bool scaling = true;
  for (const double tau : {1e-5, 1e-3, 0.1, 10.0})
    if (!close_rel(enbw_fourth_order(tau) * tau, 77.92e-3, 1e-12))
      scaling = false;
  std::ostringstream os;
  os << "ENBW(1 ms) = " << pinned << " Hz";
  detail = os.str();
  return close_rel(pinned, 77.92, 1e-9) && scaling;
}

// ---------------------------------------------------------------- C9
bool property_sweep(std::string& detail) {
  std::vector<std::string> failed;

  // Parseval on a mixed synthetic record.
  {
    NoiseModel noise;
    noise.white_density_v_rthz = 3e-6;
    noise.mains_lines_hz_v = {{50.0, 1.5e-5}};
    const double fs = 2000.0;
    const auto trace = synth_timetrace(0.0, {}, noise, fs, 0.512, 5);
    const NoiseSpectrum s = amplitude_spectral_density(trace, fs);
    const double df = fs / static_cast<double>(trace.size());
    double power = 0.0;
    for (const double a : s.asd_v_rthz) power += a * a * df;
    double mean = 0.0;
    for (const double v : trace) mean += v;
    mean /= static_cast<double>(trace.size());
    double var = 0.0;
    for (const double v : trace) var += (v - mean) * (v - mean);
    var /= static_cast<double>(trace.size());
    if (!close_rel(power, var, 1e-9)) failed.push_back("parseval");
  }

  // Deterministic synthesis.
  {
    NoiseModel noise;
    noise.white_density_v_rthz = 1e-6;
    const auto a = synth_timetrace(0.0, {}, noise, 1e3, 0.5, 9);
    const auto b = synth_timetrace(0.0, {}, noise, 1e3, 0.5, 9);
    const auto c = synth_timetrace(0.0, {}, noise, 1e3, 0.5, 10);
    if (a != b || a == c) failed.push_back("synth-determinism");
  }

  // Simulator idempotence.
  {
    SimulatorConfig sc;
    sc.noise.white_density_v_rthz = 4e-6;
    sc.seed = 12;
    SimulatorProvider sim(sc);
    SweepRequest req;
    req.n_points = 96;
    req.field = BiasField{2e-3, 0.1e-3, -0.1e-3};
    if (sim.acquire(req).values_v != sim.acquire(req).values_v)
      failed.push_back("sweep-idempotence");
  }

  // Swarm positions stay inside the box through a full run.
  {
    class Echo : public LossProvider {
     public:
      Sweep evaluate(const BiasField& f) override {
        Sweep s;
        s.freqs_hz = {1.0, 2.0, 3.0};
        s.values_v = {0.0, 0.0, 0.0};
        s.meta.field = f;
        return s;
      }
      bool concurrency_safe() const override { return false; }
    } echo;
    PsoConfig pc;
    pc.seed = 1;
    pc.max_iterations = 12;
    const SweepLossFn loss = [](const Sweep& s) {
      const double dy = s.meta.field.by_t - 0.3e-3;
      const double dz = s.meta.field.bz_t + 0.2e-3;
      return 1.0 / (1.0 + (dy * dy + dz * dz) / (0.25e-3 * 0.25e-3));
    };
    const CalibrationResult r = calibrate(pc, echo, loss);
    for (const auto& rec : r.history)
      for (const auto& pos : rec.positions)
        for (int d = 0; d < 2; ++d)
          if (pos[d] < pc.x_min[d] || pos[d] > pc.x_max[d])
            failed.push_back("pso-bounds");
  }

  // Fit equivariances under scaling and frequency shifts.
  {
    Sweep base;
    Rng rng(4);
    const double c0 = 2.9043e9;
    for (double f = c0 - 8e6; f <= c0 + 8e6 + 60e3; f += 120e3) {
      double dips = 0.0;
      for (int j = -1; j <= 1; ++j) {
        const double hw = 0.5 * 600e3;
        const double d = f - (c0 + j * 2.16e6);
        dips += 0.018 * hw * hw / (hw * hw + d * d);
      }
      base.freqs_hz.push_back(f);
      base.values_v.push_back(1.0 - dips + 7.2e-4 * rng.gaussian());
    }
    const TripletFit fa = fit_triplet(base);

    Sweep scaled = base;
    for (double& v : scaled.values_v) v *= 2.0;
    const TripletFit fb = fit_triplet(scaled);
    for (int j = 0; j < 3; ++j) {
      if (!close_rel(fb.centers_hz[j], fa.centers_hz[j], 1e-9) ||
          !close_rel(fb.linewidths_hz[j], fa.linewidths_hz[j], 1e-9)) {
        failed.push_back("fit-scale");
        break;
      }
    }

    Sweep shifted = base;
    for (double& f : shifted.freqs_hz) f += 1e6;
    const TripletFit fc = fit_triplet(shifted);
    for (int j = 0; j < 3; ++j) {
      if (std::abs(fc.centers_hz[j] - (fa.centers_hz[j] + 1e6)) >
              1e-9 * fa.centers_hz[j] ||
          !close_rel(fc.contrasts[j], fa.contrasts[j], 1e-9)) {
        failed.push_back("fit-shift");
        break;
      }
    }
  }

  // Wire protocol canonical form survives 200 random round trips.
  {
    Rng rng(77);
    for (int i = 0; i < 200; ++i) {
      const double mag = std::pow(10.0, rng.uniform(-9.0, 9.0));
      protocol::SetFieldCmd sf{(rng.uniform() - 0.5) * mag,
                               (rng.uniform() - 0.5) * mag,
                               (rng.uniform() - 0.5) * mag};
      const std::string line = protocol::serialize(sf);
      if (protocol::serialize(protocol::parse_request(line)) != line) {
        failed.push_back("protocol-roundtrip");
        break;
      }
      protocol::DataPoint dp{rng.uniform(1e9, 3e9),
                             (rng.uniform() - 0.5) * mag};
      const std::string pl = protocol::serialize(dp);
      if (protocol::serialize(protocol::parse_data_point(pl)) != pl) {
        failed.push_back("protocol-roundtrip");
        break;
      }
    }
  }

  if (failed.empty()) {
    detail = "parseval, determinism, bounds, equivariance, protocol";
    return true;
  }
  detail = "failed:";
  for (const auto& f : failed) detail += " " + f;
  return false;
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    const char* name;
    double budget_s;
    std::function<bool(std::string&)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "slope-to-field conversions", 0.5, slope_conversions},
      {2, "sensitivity quotients and floors", 0.5, sensitivity_quotients},
      {3, "enhancement pipeline", 10.0, enhancement_pipeline},
      {4, "overlap and separated field spectra", 1.0, field_configurations},
      {5, "four-orientation lineshape identity", 1.0, lineshape_identity},
      {6, "bias-field swarm search, seeds 1-10", 60.0, swarm_search},
      {7, "triplet recovery at SNR 20", 30.0, fit_recovery},
      {8, "lock-in noise bandwidth", 0.5, noise_bandwidth},
      {9, "module invariants", 30.0, property_sweep},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    std::string detail;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    const bool in_budget = dt <= c.budget_s;
    if (!in_budget)
      detail += detail.empty() ? "" : "; ";
    if (!in_budget) detail += "over budget";
    const bool pass = ok && in_budget;
    std::printf("[%s] criterion %d: %s (%.2f s) - %s\n",
                pass ? "PASS" : "FAIL", c.number, c.name, dt, detail.c_str());
    if (!pass) ++failures;
  }
  return failures;
}
