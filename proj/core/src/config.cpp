#include "nvcalib/config.hpp"

#include <charconv>
#include <cmath>

#include <json.hpp>

#include "nvcalib/errors.hpp"
#include "nvcalib/io.hpp"

namespace nvcalib {

namespace {

using nlohmann::json;

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object())
    throw ConfigError(join(path, "") + ": expected a JSON object");
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError("unknown config key: " + join(path, it.key()));
  }
}

template <typename T>
void read_if(const json& j, const std::string& path, const char* key,
             T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(join(path, key) + ": bad value type");
  }
}

void read_if(const json& j, const std::string& path, const char* key,
             std::optional<double>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
    return;
  }
  try {
    out = j.at(key).get<double>();
  } catch (const json::exception&) {
    throw ConfigError(join(path, key) + ": bad value type");
  }
}

void read_coord2(const json& j, const std::string& path, const char* key,
                 Coord2& out) {
  if (!j.contains(key)) return;
  std::vector<double> v;
  try {
    v = j.at(key).get<std::vector<double>>();
  } catch (const json::exception&) {
    throw ConfigError(join(path, key) + ": expected [y, z]");
  }
  if (v.size() != 2) throw ConfigError(join(path, key) + ": expected [y, z]");
  out = {v[0], v[1]};
}

BiasField field_from(const json& v, const std::string& where) {
  std::vector<double> a;
  try {
    a = v.get<std::vector<double>>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": expected [bx, by, bz] in tesla");
  }
  if (a.size() != 3)
    throw ConfigError(where + ": expected [bx, by, bz] in tesla");
  return BiasField{a[0], a[1], a[2]};
}

void apply_constants(const json& j, const std::string& path, Constants& c) {
  require_object(j, path);
  check_keys(j, path,
             {"d_hz", "gamma_e_hz_per_t", "delta_hf_hz", "theta_tet_rad",
              "g_e", "mu_b_j_per_t", "h_j_s", "p_f"});
  read_if(j, path, "d_hz", c.d_hz);
  read_if(j, path, "gamma_e_hz_per_t", c.gamma_e_hz_per_t);
  read_if(j, path, "delta_hf_hz", c.delta_hf_hz);
  read_if(j, path, "theta_tet_rad", c.theta_tet_rad);
  read_if(j, path, "g_e", c.g_e);
  read_if(j, path, "mu_b_j_per_t", c.mu_b_j_per_t);
  read_if(j, path, "h_j_s", c.h_j_s);
  read_if(j, path, "p_f", c.p_f);
}

void apply_model(const json& j, const std::string& path, SpectrumModel& m) {
  require_object(j, path);
  check_keys(j, path, {"f0_v", "contrast", "linewidth_hz"});
  read_if(j, path, "f0_v", m.f0_v);
  read_if(j, path, "contrast", m.contrast);
  read_if(j, path, "linewidth_hz", m.linewidth_hz);
}

void apply_noise(const json& j, const std::string& path, NoiseModel& n) {
  require_object(j, path);
  check_keys(j, path, {"white_density_v_rthz", "mains_lines_hz_v",
                       "electronic_floor_v_rthz"});
  read_if(j, path, "white_density_v_rthz", n.white_density_v_rthz);
  read_if(j, path, "electronic_floor_v_rthz", n.electronic_floor_v_rthz);
  if (j.contains("mains_lines_hz_v")) {
    const auto& lines = j.at("mains_lines_hz_v");
    if (!lines.is_array())
      throw ConfigError(join(path, "mains_lines_hz_v") +
                        ": expected [[hz, volts], ...]");
    n.mains_lines_hz_v.clear();
    for (const auto& entry : lines) {
      std::vector<double> pair;
      try {
        pair = entry.get<std::vector<double>>();
      } catch (const json::exception&) {
        throw ConfigError(join(path, "mains_lines_hz_v") +
                          ": expected [[hz, volts], ...]");
      }
      if (pair.size() != 2)
        throw ConfigError(join(path, "mains_lines_hz_v") +
                          ": each tone is [hz, volts]");
      n.mains_lines_hz_v.emplace_back(pair[0], pair[1]);
    }
  }
}

void apply_window(const json& j, const std::string& path, SweepWindow& w) {
  require_object(j, path);
  check_keys(j, path, {"f_start_hz", "f_stop_hz", "n_points"});
  read_if(j, path, "f_start_hz", w.f_start_hz);
  read_if(j, path, "f_stop_hz", w.f_stop_hz);
  read_if(j, path, "n_points", w.n_points);
}

void apply_provider(const json& j, const std::string& path,
                    ProviderConfig& p) {
  require_object(j, path);
  check_keys(j, path, {"kind", "endpoint", "settle_time_s", "timeout_s",
                       "max_field_t", "overlap_truth_t"});
  read_if(j, path, "kind", p.kind);
  read_if(j, path, "endpoint", p.endpoint);
  read_if(j, path, "settle_time_s", p.settle_time_s);
  read_if(j, path, "timeout_s", p.timeout_s);
  read_if(j, path, "max_field_t", p.max_field_t);
  if (j.contains("overlap_truth_t")) {
    if (j.at("overlap_truth_t").is_null())
      p.overlap_truth.reset();
    else
      p.overlap_truth =
          field_from(j.at("overlap_truth_t"), join(path, "overlap_truth_t"));
  }
}

void apply_pso(const json& j, const std::string& path, PsoConfig& p) {
  require_object(j, path);
  check_keys(j, path,
             {"n_particles", "inertia", "c_local", "c_global", "x_min_t",
              "x_max_t", "v_min_t", "v_max_t", "b_main_x_t",
              "density_radius_t", "density_fraction", "max_iterations"});
  read_if(j, path, "n_particles", p.n_particles);
  read_if(j, path, "inertia", p.inertia);
  read_if(j, path, "c_local", p.c_local);
  read_if(j, path, "c_global", p.c_global);
  read_coord2(j, path, "x_min_t", p.x_min);
  read_coord2(j, path, "x_max_t", p.x_max);
  read_coord2(j, path, "v_min_t", p.v_min);
  read_coord2(j, path, "v_max_t", p.v_max);
  read_if(j, path, "b_main_x_t", p.b_main_x_t);
  read_if(j, path, "density_radius_t", p.density_radius_t);
  read_if(j, path, "density_fraction", p.density_fraction);
  read_if(j, path, "max_iterations", p.max_iterations);
}

void apply_calibration(const json& j, const std::string& path,
                       CalibrationConfig& c) {
  require_object(j, path);
  check_keys(j, path, {"pso", "sweep", "crop_half_width_hz"});
  if (j.contains("pso")) apply_pso(j.at("pso"), join(path, "pso"), c.pso);
  if (j.contains("sweep"))
    apply_window(j.at("sweep"), join(path, "sweep"), c.sweep);
  read_if(j, path, "crop_half_width_hz", c.crop_half_width_hz);
}

void apply_lockin(const json& j, const std::string& path, LockinConfig& l) {
  require_object(j, path);
  check_keys(j, path, {"mod_depth_hz", "three_tone", "tau_s",
                       "phase_samples", "tone_norm", "output_gain"});
  read_if(j, path, "mod_depth_hz", l.mod_depth_hz);
  read_if(j, path, "three_tone", l.three_tone);
  read_if(j, path, "tau_s", l.tau_s);
  read_if(j, path, "phase_samples", l.phase_samples);
  read_if(j, path, "tone_norm", l.tone_norm);
  read_if(j, path, "output_gain", l.output_gain);
}

void apply_mode(const json& j, const std::string& path, ModeConfig& m) {
  require_object(j, path);
  check_keys(j, path,
             {"field_t", "white_density_v_rthz", "electronic_floor_v_rthz",
              "slope_target_v_per_hz", "center_hint_hz"});
  if (j.contains("field_t"))
    m.field = field_from(j.at("field_t"), join(path, "field_t"));
  read_if(j, path, "white_density_v_rthz", m.white_density_v_rthz);
  read_if(j, path, "electronic_floor_v_rthz", m.electronic_floor_v_rthz);
  read_if(j, path, "slope_target_v_per_hz", m.slope_target_v_per_hz);
  read_if(j, path, "center_hint_hz", m.center_hint_hz);
}

void apply_sensitivity(const json& j, const std::string& path,
                       SensitivityConfig& s) {
  require_object(j, path);
  check_keys(j, path,
             {"fs_hz", "duration_s", "n_records", "band_lo_hz", "band_hi_hz",
              "slope_window_half_hz", "slope_step_hz",
              "slope_fit_half_window_hz", "separated", "overlapped"});
  read_if(j, path, "fs_hz", s.fs_hz);
  read_if(j, path, "duration_s", s.duration_s);
  read_if(j, path, "n_records", s.n_records);
  read_if(j, path, "band_lo_hz", s.band_lo_hz);
  read_if(j, path, "band_hi_hz", s.band_hi_hz);
  read_if(j, path, "slope_window_half_hz", s.slope_window_half_hz);
  read_if(j, path, "slope_step_hz", s.slope_step_hz);
  read_if(j, path, "slope_fit_half_window_hz", s.slope_fit_half_window_hz);
  if (j.contains("separated"))
    apply_mode(j.at("separated"), join(path, "separated"), s.separated);
  if (j.contains("overlapped"))
    apply_mode(j.at("overlapped"), join(path, "overlapped"), s.overlapped);
}

void check_window(const SweepWindow& w, const char* what) {
  if (!(w.f_start_hz > 0.0) || !(w.f_stop_hz > w.f_start_hz))
    throw std::invalid_argument(std::string(what) +
                                ": needs 0 < f_start < f_stop");
  if (w.n_points < 3)
    throw std::invalid_argument(std::string(what) + ": needs n_points >= 3");
}

}  // namespace

void RunConfig::validate() const {
  constants.validate();
  model.validate();
  noise.validate();

  if (provider.kind != "simulator" && provider.kind != "remote")
    throw std::invalid_argument(
        "provider.kind must be 'simulator' or 'remote'");
  if (provider.kind == "remote") {
    const auto colon = provider.endpoint.rfind(':');
    if (colon == std::string::npos || colon == 0 ||
        colon + 1 == provider.endpoint.size())
      throw std::invalid_argument(
          "provider.endpoint must look like 'host:port'");
    int port = 0;
    const auto* begin = provider.endpoint.data() + colon + 1;
    const auto* end = provider.endpoint.data() + provider.endpoint.size();
    const auto [p, ec] = std::from_chars(begin, end, port);
    if (ec != std::errc{} || p != end || port < 1 || port > 65535)
      throw std::invalid_argument("provider.endpoint has a bad port");
  }
  if (!(provider.settle_time_s >= 0.0) || !(provider.timeout_s > 0.0) ||
      !(provider.max_field_t > 0.0))
    throw std::invalid_argument("bad provider timings or field range");
  if (provider.overlap_truth) {
    provider.overlap_truth->validate(provider.max_field_t);
    if (provider.overlap_truth->norm_t() == 0.0)
      throw std::invalid_argument("overlap truth must be a nonzero field");
  }

  calibration.pso.validate();
  check_window(calibration.sweep, "calibration.sweep");
  if (!(calibration.crop_half_width_hz >= 1.5 * constants.delta_hf_hz))
    throw std::invalid_argument(
        "calibration.crop_half_width_hz must cover three hyperfine "
        "spacings");
  check_window(sweep, "sweep");

  if (lockin.mod_depth_hz && !(*lockin.mod_depth_hz > 0.0))
    throw std::invalid_argument("lockin.mod_depth_hz must be positive");
  if (!(lockin.tau_s > 0.0))
    throw std::invalid_argument("lockin.tau_s must be positive");
  if (lockin.phase_samples < 32)
    throw std::invalid_argument("lockin.phase_samples must be at least 32");
  if (lockin.tone_norm != "average" && lockin.tone_norm != "sum")
    throw std::invalid_argument("lockin.tone_norm must be 'average' or 'sum'");
  if (!(lockin.output_gain > 0.0))
    throw std::invalid_argument("lockin.output_gain must be positive");

  const auto& s = sensitivity;
  if (!(s.fs_hz > 0.0) || !(s.duration_s > 0.0))
    throw std::invalid_argument("sensitivity sampling must be positive");
  if (s.fs_hz * s.duration_s < 8.0)
    throw std::invalid_argument("sensitivity records are too short");
  if (s.n_records < 1)
    throw std::invalid_argument("sensitivity.n_records must be at least 1");
  if (!(s.band_lo_hz > 0.0))
    throw std::invalid_argument("sensitivity.band_lo_hz must be positive");
  if (s.band_hi_hz && !(*s.band_hi_hz > s.band_lo_hz))
    throw std::invalid_argument(
        "sensitivity.band_hi_hz must exceed band_lo_hz");
  if (!(s.slope_window_half_hz > 0.0) || !(s.slope_step_hz > 0.0) ||
      !(s.slope_fit_half_window_hz >= 2.0 * s.slope_step_hz))
    throw std::invalid_argument("bad sensitivity slope windows");
  for (const ModeConfig* m : {&s.separated, &s.overlapped}) {
    m->field.validate(provider.max_field_t);
    if (!(m->white_density_v_rthz >= 0.0) ||
        !(m->electronic_floor_v_rthz >= 0.0))
      throw std::invalid_argument("mode noise densities must be >= 0");
    if (m->slope_target_v_per_hz && !(*m->slope_target_v_per_hz > 0.0))
      throw std::invalid_argument("mode slope target must be positive");
    if (m->center_hint_hz && !(*m->center_hint_hz > 0.0))
      throw std::invalid_argument("mode center hint must be positive");
  }
}

RunConfig default_config() {
  RunConfig cfg;
  cfg.model.f0_v = 2.0;
  cfg.model.contrast = 0.0051;
  cfg.model.linewidth_hz = 550e3;
  cfg.model.constants = cfg.constants;

  cfg.noise.white_density_v_rthz = 6.58e-6;
  cfg.noise.mains_lines_hz_v = {
      {50.0, 2.5e-5}, {100.0, 1.2e-5}, {150.0, 6.0e-6}};
  cfg.noise.electronic_floor_v_rthz = 265e-9;

  cfg.provider.overlap_truth = BiasField{2.12e-3, -0.016e-3, -0.070e-3};

  // Coarse-alignment search box of the compensation coils. Keeping the box
  // this tight guarantees that everywhere inside it every line group has a
  // neighbor close enough to contaminate the loss crop, so the reciprocal
  // central linewidth peaks only at full overlap.
  cfg.calibration.pso.x_min = {-0.10e-3, -0.10e-3};
  cfg.calibration.pso.x_max = {0.10e-3, 0.10e-3};
  // Velocity clamp chosen empirically: wide enough that a ten-particle swarm
  // keeps sampling fresh cells for all 25 iterations instead of contracting
  // onto its first nonzero loss, small enough that refinement near the
  // optimum still happens. 0.08 mT/iteration captured the overlap in 29 of
  // 30 seeded runs over three seed decades; neighbouring values did worse.
  cfg.calibration.pso.v_min = {-0.08e-3, -0.08e-3};
  cfg.calibration.pso.v_max = {0.08e-3, 0.08e-3};

  cfg.sensitivity.n_records = 20;
  cfg.sensitivity.separated.field = BiasField{2.12e-3, -0.586e-3, 1.01e-3};
  cfg.sensitivity.separated.white_density_v_rthz = 5.50e-6;
  cfg.sensitivity.separated.electronic_floor_v_rthz = 254e-9;
  cfg.sensitivity.separated.slope_target_v_per_hz = 0.148e-6;
  cfg.sensitivity.separated.center_hint_hz = 2.8974e9;
  cfg.sensitivity.overlapped.field = BiasField{2.12e-3, -0.016e-3, -0.070e-3};
  cfg.sensitivity.overlapped.white_density_v_rthz = 6.58e-6;
  cfg.sensitivity.overlapped.electronic_floor_v_rthz = 265e-9;
  cfg.sensitivity.overlapped.slope_target_v_per_hz = 0.476e-6;
  cfg.sensitivity.overlapped.center_hint_hz = 2.9043e9;
  return cfg;
}

RunConfig parse_config(std::string_view json_text) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config: malformed JSON");
  require_object(j, "");
  check_keys(j, "",
             {"seed", "constants", "model", "noise", "provider",
              "calibration", "sweep", "lockin", "sensitivity", "out_dir"});

  RunConfig cfg = default_config();
  read_if(j, "", "seed", cfg.seed);
  read_if(j, "", "out_dir", cfg.out_dir);
  if (j.contains("constants"))
    apply_constants(j.at("constants"), "constants", cfg.constants);
  if (j.contains("model")) apply_model(j.at("model"), "model", cfg.model);
  if (j.contains("noise")) apply_noise(j.at("noise"), "noise", cfg.noise);
  if (j.contains("provider"))
    apply_provider(j.at("provider"), "provider", cfg.provider);
  if (j.contains("calibration"))
    apply_calibration(j.at("calibration"), "calibration", cfg.calibration);
  if (j.contains("sweep")) apply_window(j.at("sweep"), "sweep", cfg.sweep);
  if (j.contains("lockin"))
    apply_lockin(j.at("lockin"), "lockin", cfg.lockin);
  if (j.contains("sensitivity"))
    apply_sensitivity(j.at("sensitivity"), "sensitivity", cfg.sensitivity);

  cfg.model.constants = cfg.constants;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

std::string config_to_json(const RunConfig& cfg, int indent) {
  json j;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  j["constants"] = {{"d_hz", cfg.constants.d_hz},
                    {"gamma_e_hz_per_t", cfg.constants.gamma_e_hz_per_t},
                    {"delta_hf_hz", cfg.constants.delta_hf_hz},
                    {"theta_tet_rad", cfg.constants.theta_tet_rad},
                    {"g_e", cfg.constants.g_e},
                    {"mu_b_j_per_t", cfg.constants.mu_b_j_per_t},
                    {"h_j_s", cfg.constants.h_j_s},
                    {"p_f", cfg.constants.p_f}};
  j["model"] = {{"f0_v", cfg.model.f0_v},
                {"contrast", cfg.model.contrast},
                {"linewidth_hz", cfg.model.linewidth_hz}};
  json mains = json::array();
  for (const auto& [f, a] : cfg.noise.mains_lines_hz_v)
    mains.push_back({f, a});
  j["noise"] = {{"white_density_v_rthz", cfg.noise.white_density_v_rthz},
                {"mains_lines_hz_v", mains},
                {"electronic_floor_v_rthz",
                 cfg.noise.electronic_floor_v_rthz}};
  j["provider"] = {{"kind", cfg.provider.kind},
                   {"endpoint", cfg.provider.endpoint},
                   {"settle_time_s", cfg.provider.settle_time_s},
                   {"timeout_s", cfg.provider.timeout_s},
                   {"max_field_t", cfg.provider.max_field_t}};
  if (cfg.provider.overlap_truth)
    j["provider"]["overlap_truth_t"] = {cfg.provider.overlap_truth->bx_t,
                                        cfg.provider.overlap_truth->by_t,
                                        cfg.provider.overlap_truth->bz_t};
  else
    j["provider"]["overlap_truth_t"] = nullptr;
  const auto& p = cfg.calibration.pso;
  j["calibration"] = {
      {"pso",
       {{"n_particles", p.n_particles},
        {"inertia", p.inertia},
        {"c_local", p.c_local},
        {"c_global", p.c_global},
        {"x_min_t", p.x_min},
        {"x_max_t", p.x_max},
        {"v_min_t", p.v_min},
        {"v_max_t", p.v_max},
        {"b_main_x_t", p.b_main_x_t},
        {"density_radius_t", p.density_radius_t},
        {"density_fraction", p.density_fraction},
        {"max_iterations", p.max_iterations}}},
      {"sweep",
       {{"f_start_hz", cfg.calibration.sweep.f_start_hz},
        {"f_stop_hz", cfg.calibration.sweep.f_stop_hz},
        {"n_points", cfg.calibration.sweep.n_points}}},
      {"crop_half_width_hz", cfg.calibration.crop_half_width_hz}};
  j["sweep"] = {{"f_start_hz", cfg.sweep.f_start_hz},
                {"f_stop_hz", cfg.sweep.f_stop_hz},
                {"n_points", cfg.sweep.n_points}};
  j["lockin"] = {{"three_tone", cfg.lockin.three_tone},
                 {"tau_s", cfg.lockin.tau_s},
                 {"phase_samples", cfg.lockin.phase_samples},
                 {"tone_norm", cfg.lockin.tone_norm},
                 {"output_gain", cfg.lockin.output_gain}};
  j["lockin"]["mod_depth_hz"] =
      cfg.lockin.mod_depth_hz ? json(*cfg.lockin.mod_depth_hz)
                              : json(nullptr);
  auto mode_json = [](const ModeConfig& m) {
    json o = {{"field_t", {m.field.bx_t, m.field.by_t, m.field.bz_t}},
              {"white_density_v_rthz", m.white_density_v_rthz},
              {"electronic_floor_v_rthz", m.electronic_floor_v_rthz}};
    o["slope_target_v_per_hz"] = m.slope_target_v_per_hz
                                     ? json(*m.slope_target_v_per_hz)
                                     : json(nullptr);
    o["center_hint_hz"] =
        m.center_hint_hz ? json(*m.center_hint_hz) : json(nullptr);
    return o;
  };
  const auto& s = cfg.sensitivity;
  j["sensitivity"] = {{"fs_hz", s.fs_hz},
                      {"duration_s", s.duration_s},
                      {"n_records", s.n_records},
                      {"band_lo_hz", s.band_lo_hz},
                      {"slope_window_half_hz", s.slope_window_half_hz},
                      {"slope_step_hz", s.slope_step_hz},
                      {"slope_fit_half_window_hz",
                       s.slope_fit_half_window_hz},
                      {"separated", mode_json(s.separated)},
                      {"overlapped", mode_json(s.overlapped)}};
  j["sensitivity"]["band_hi_hz"] =
      s.band_hi_hz ? json(*s.band_hi_hz) : json(nullptr);
  return j.dump(indent) + "\n";
}

}  // namespace nvcalib
