// nvcalib: simulate, calibrate and characterize a four-orientation
// ensemble magnetometer from a single JSON configuration.
//
// Exit codes: 0 ok, 1 config or usage error, 2 provider error,
// 3 calibration did not converge.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nvcalib/config.hpp"
#include "nvcalib/errors.hpp"
#include "nvcalib/io.hpp"
#include "nvcalib/svgplot.hpp"
#include "nvcalib/workflows.hpp"

namespace {

using namespace nvcalib;

struct GlobalArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> provider;
  std::optional<std::string> out_dir;
};

void apply_provider_string(RunConfig& cfg, const std::string& s) {
  if (s == "simulator") {
    cfg.provider.kind = "simulator";
    return;
  }
  if (s.rfind("remote:", 0) == 0 && s.size() > 7) {
    cfg.provider.kind = "remote";
    cfg.provider.endpoint = s.substr(7);
    return;
  }
  throw ConfigError("provider must be 'simulator' or 'remote:host:port', got '" +
                    s + "'");
}

/// Precedence: command-line flag > environment variable > config file.
RunConfig resolve_config(const GlobalArgs& g) {
  RunConfig cfg =
      g.config_path.empty() ? default_config() : load_config(g.config_path);
  if (const char* e = std::getenv("NVCALIB_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(e, &end, 10);
    if (end == e || *end != '\0')
      throw ConfigError(std::string("NVCALIB_SEED is not an integer: ") + e);
    cfg.seed = v;
  }
  if (const char* e = std::getenv("NVCALIB_PROVIDER"))
    apply_provider_string(cfg, e);
  if (g.seed) cfg.seed = *g.seed;
  if (g.provider) apply_provider_string(cfg, *g.provider);
  if (g.out_dir) cfg.out_dir = *g.out_dir;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

std::string artifact_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out_dir);
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

int cmd_sweep(const RunConfig& cfg, const std::vector<double>& field,
              const std::string& mode) {
  auto provider = make_provider(cfg);
  SweepRequest req;
  req.f_start_hz = cfg.sweep.f_start_hz;
  req.f_stop_hz = cfg.sweep.f_stop_hz;
  req.n_points = cfg.sweep.n_points;
  req.mode = sweep_mode_from_string(mode);
  if (req.mode == SweepMode::lockin) {
    const LockinSettings ls = lockin_settings(cfg);
    req.mod_depth_hz = ls.mod_depth_hz;
    req.three_tone = ls.three_tone;
  }
  if (!field.empty()) {
    if (field.size() != 3)
      throw ConfigError("--field needs exactly bx,by,bz in tesla");
    req.field = BiasField{field[0], field[1], field[2]};
  }
  const Sweep sweep = provider->acquire(req);

  const std::string path = artifact_path(cfg, "sweep.csv");
  io::write_file(path, io::sweep_to_csv(sweep));

  std::size_t i_min = 0;
  for (std::size_t i = 1; i < sweep.size(); ++i)
    if (sweep.values_v[i] < sweep.values_v[i_min]) i_min = i;
  std::printf("wrote %s (%zu points, %s)\n", path.c_str(), sweep.size(),
              mode.c_str());
  std::printf("min %.6g V at %.6f MHz\n", sweep.values_v[i_min],
              sweep.freqs_hz[i_min] / 1e6);
  return 0;
}

int cmd_fit(const RunConfig& cfg, const std::string& input) {
  const Sweep sweep = io::sweep_from_csv(io::read_file(input));
  const TripletFit fit = fit_triplet(sweep);
  const std::string json = io::to_json_string(fit);
  io::write_file(artifact_path(cfg, "fit.json"), json);
  std::fputs(json.c_str(), stdout);
  return 0;
}

int cmd_calibrate(const RunConfig& cfg) {
  auto provider = make_provider(cfg);
  const CalibrationResult result = run_calibration(cfg, *provider);

  io::write_file(artifact_path(cfg, "calibration.json"),
                 io::to_json_string(result));
  io::write_file(artifact_path(cfg, "history.csv"),
                 io::history_to_csv(result.history));

  svg::Series best;
  best.label = "central linewidth";
  best.color = "#b2401f";
  for (const IterationRecord& rec : result.history) {
    if (rec.g_best_loss <= 0.0) continue;
    best.x.push_back(static_cast<double>(rec.iteration));
    best.y.push_back(1.0 / rec.g_best_loss / 1e3);  // kHz
  }
  svg::PlotOptions opt;
  opt.title = "Bias-field search convergence";
  opt.x_label = "iteration";
  opt.y_label = "best central linewidth (kHz)";
  if (!best.x.empty())
    io::write_file(artifact_path(cfg, "convergence.svg"),
                   svg::line_plot({best}, opt));

  std::printf("best field (%.6g, %.6g, %.6g) mT, loss %.6g 1/Hz\n",
              result.best_field.bx_t * 1e3, result.best_field.by_t * 1e3,
              result.best_field.bz_t * 1e3, result.best_loss);
  std::printf("%d evaluation passes, converged: %s\n", result.iterations,
              result.converged ? "yes" : "no");
  return result.converged ? 0 : 3;
}

void write_mode_artifacts(const RunConfig& cfg, const SensitivityArtifacts& art,
                          const char* mode) {
  const std::string tag(mode);
  io::write_file(artifact_path(cfg, "sensitivity_" + tag + ".json"),
                 io::to_json_string(art.report));
  io::write_file(artifact_path(cfg, "noise_" + tag + "_quiet.csv"),
                 io::spectrum_to_csv(art.quiet_spectrum));
  io::write_file(artifact_path(cfg, "noise_" + tag + "_onsignal.csv"),
                 io::spectrum_to_csv(art.on_signal_spectrum));
  io::write_file(artifact_path(cfg, "noise_" + tag + "_floor.csv"),
                 io::spectrum_to_csv(art.floor_spectrum));
  io::write_file(artifact_path(cfg, "lockin_" + tag + ".csv"),
                 io::sweep_to_csv(art.slope.sweep));
  std::printf(
      "%s: slope %.4g V/Hz, response %.4g V/T, noise %.4g V/rtHz, "
      "sensitivity %.4g T/rtHz (floor %.4g)\n",
      mode, art.report.slope_v_per_hz, art.report.response_v_per_t,
      art.report.voltage_noise_v_rthz, art.report.field_sensitivity_t_rthz,
      art.report.electronic_floor_t_rthz);
}

int cmd_sensitivity(const RunConfig& cfg, const std::string& mode) {
  if (mode == "separated" || mode == "both")
    write_mode_artifacts(cfg, run_sensitivity(cfg, SensingMode::separated),
                         "separated");
  if (mode == "overlapped" || mode == "both")
    write_mode_artifacts(cfg, run_sensitivity(cfg, SensingMode::overlapped),
                         "overlapped");
  return 0;
}

int cmd_report(const RunConfig& cfg) {
  const EnhancementReport rep = run_enhancement(cfg);
  write_mode_artifacts(cfg, rep.separated, "separated");
  write_mode_artifacts(cfg, rep.overlapped, "overlapped");

  nlohmann::json j;
  j["enhancement"] = rep.enhancement;
  j["separated"] =
      nlohmann::json::parse(io::to_json_string(rep.separated.report));
  j["overlapped"] =
      nlohmann::json::parse(io::to_json_string(rep.overlapped.report));
  io::write_file(artifact_path(cfg, "report.json"), j.dump(2) + "\n");

  // Wide survey spectra of both bias fields on one canvas.
  {
    auto provider = make_provider(cfg);
    SweepRequest req;
    req.f_start_hz = cfg.sweep.f_start_hz;
    req.f_stop_hz = cfg.sweep.f_stop_hz;
    req.n_points = cfg.sweep.n_points;
    req.mode = SweepMode::cw;
    req.field = cfg.sensitivity.separated.field;
    const Sweep sep = provider->acquire(req);
    req.field = cfg.sensitivity.overlapped.field;
    const Sweep ovl = provider->acquire(req);

    svg::Series a{sep.freqs_hz, sep.values_v, "separated", "#1f6fb2"};
    svg::Series b{ovl.freqs_hz, ovl.values_v, "overlapped", "#b2401f"};
    for (auto& f : a.x) f /= 1e6;
    for (auto& f : b.x) f /= 1e6;
    svg::PlotOptions opt;
    opt.title = "Survey spectra";
    opt.x_label = "frequency (MHz)";
    opt.y_label = "photodetector (V)";
    io::write_file(artifact_path(cfg, "spectra.svg"),
                   svg::line_plot({a, b}, opt));
  }
  {
    svg::Series a{rep.separated.quiet_spectrum.freqs_hz,
                  rep.separated.quiet_spectrum.asd_v_rthz, "separated",
                  "#1f6fb2"};
    svg::Series b{rep.overlapped.quiet_spectrum.freqs_hz,
                  rep.overlapped.quiet_spectrum.asd_v_rthz, "overlapped",
                  "#b2401f"};
    svg::PlotOptions opt;
    opt.title = "Quiet-output noise spectra";
    opt.x_label = "frequency (Hz)";
    opt.y_label = "ASD (V/rtHz)";
    opt.log_y = true;
    io::write_file(artifact_path(cfg, "noise.svg"),
                   svg::line_plot({a, b}, opt));
  }

  std::printf("enhancement %.4g (separated %.4g / overlapped %.4g T/rtHz)\n",
              rep.enhancement, rep.separated.report.field_sensitivity_t_rthz,
              rep.overlapped.report.field_sensitivity_t_rthz);
  return 0;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const ProviderError& e) {
    std::fprintf(stderr, "provider error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Ensemble magnetometer toolkit: spectra, bias-field calibration and "
      "sensitivity analysis"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "JSON run configuration")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override the run seed");
  app.add_option("--provider", g.provider,
                 "Override the provider: simulator | remote:host:port");
  app.add_option("--out", g.out_dir, "Artifact output directory");

  auto* sweep = app.add_subcommand(
      "sweep", "Acquire one sweep of the configured window -> sweep.csv");
  std::vector<double> sweep_field;
  std::string sweep_mode = "cw";
  sweep->add_option("--field", sweep_field, "Bias field bx,by,bz in tesla")
      ->delimiter(',')
      ->expected(3);
  sweep->add_option("--mode", sweep_mode, "cw | lockin")
      ->check(CLI::IsMember({"cw", "lockin"}));

  auto* fit = app.add_subcommand(
      "fit", "Fit a hyperfine triplet to a sweep CSV -> fit.json + stdout");
  std::string fit_input;
  fit->add_option("input", fit_input, "Sweep CSV path")
      ->required()
      ->check(CLI::ExistingFile);

  auto* calibrate = app.add_subcommand(
      "calibrate",
      "Search the compensation field -> calibration.json, history.csv, "
      "convergence.svg");

  auto* sensitivity = app.add_subcommand(
      "sensitivity",
      "Measure slope and noise of one sensing mode -> sensitivity_<mode>.json "
      "+ CSVs");
  std::string sens_mode = "both";
  sensitivity->add_option("--mode", sens_mode, "separated | overlapped | both")
      ->check(CLI::IsMember({"separated", "overlapped", "both"}));

  auto* report = app.add_subcommand(
      "report",
      "Full comparison of both modes -> report.json, spectra.svg, noise.svg");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;
  }

  return guarded([&]() -> int {
    const RunConfig cfg = resolve_config(g);
    if (sweep->parsed()) return cmd_sweep(cfg, sweep_field, sweep_mode);
    if (fit->parsed()) return cmd_fit(cfg, fit_input);
    if (calibrate->parsed()) return cmd_calibrate(cfg);
    if (sensitivity->parsed()) return cmd_sensitivity(cfg, sens_mode);
    if (report->parsed()) return cmd_report(cfg);
    return 1;
  });
}
