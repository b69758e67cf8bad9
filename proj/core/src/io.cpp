#include "nvcalib/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nvcalib/errors.hpp"
#include "nvcalib/protocol.hpp"

namespace nvcalib::io {

namespace {

using nlohmann::json;

std::string fd(double v) { return protocol::format_double(v); }

double parse_number(std::string_view token, const char* context) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(token.begin(), token.end(), v);
  if (ec != std::errc{} || p != token.end())
    throw ConfigError(std::string(context) + ": malformed number '" +
                      std::string(token) + "'");
  return v;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = eol + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return fields;
}

json parse_json(std::string_view text, const char* context) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded())
    throw ConfigError(std::string(context) + ": malformed JSON");
  return j;
}

template <typename T>
T get_field(const json& j, const char* key, const char* context) {
  if (!j.contains(key))
    throw ConfigError(std::string(context) + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(context) + ": bad value for '" + key + "'");
  }
}

template <typename T, std::size_t N>
std::array<T, N> get_array(const json& j, const char* key,
                           const char* context) {
  const auto vec = get_field<std::vector<T>>(j, key, context);
  if (vec.size() != N)
    throw ConfigError(std::string(context) + ": '" + key + "' needs " +
                      std::to_string(N) + " entries");
  std::array<T, N> out{};
  std::copy(vec.begin(), vec.end(), out.begin());
  return out;
}

}  // namespace

std::string sweep_to_csv(const Sweep& sweep) {
  sweep.validate();
  std::string out = "frequency_hz,signal_v\n";
  for (std::size_t i = 0; i < sweep.size(); ++i)
    out += fd(sweep.freqs_hz[i]) + "," + fd(sweep.values_v[i]) + "\n";
  return out;
}

Sweep sweep_from_csv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0] != "frequency_hz,signal_v")
    throw ConfigError("sweep csv: expected header 'frequency_hz,signal_v'");
  Sweep s;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i]);
    if (fields.size() != 2)
      throw ConfigError("sweep csv: row " + std::to_string(i) +
                        " needs 2 fields");
    s.freqs_hz.push_back(parse_number(fields[0], "sweep csv"));
    s.values_v.push_back(parse_number(fields[1], "sweep csv"));
  }
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("sweep csv: ") + e.what());
  }
  return s;
}

std::string spectrum_to_csv(const NoiseSpectrum& spectrum) {
  std::string out = "frequency_hz,asd_v_per_rthz\n";
  for (std::size_t i = 0; i < spectrum.freqs_hz.size(); ++i)
    out += fd(spectrum.freqs_hz[i]) + "," + fd(spectrum.asd_v_rthz[i]) + "\n";
  return out;
}

NoiseSpectrum spectrum_from_csv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0] != "frequency_hz,asd_v_per_rthz")
    throw ConfigError(
        "spectrum csv: expected header 'frequency_hz,asd_v_per_rthz'");
  NoiseSpectrum s;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i]);
    if (fields.size() != 2)
      throw ConfigError("spectrum csv: row " + std::to_string(i) +
                        " needs 2 fields");
    s.freqs_hz.push_back(parse_number(fields[0], "spectrum csv"));
    s.asd_v_rthz.push_back(parse_number(fields[1], "spectrum csv"));
  }
  return s;
}

std::string history_to_csv(const std::vector<IterationRecord>& history) {
  std::string out = "iteration,particle,by_t,bz_t,loss,g_best_loss\n";
  for (const auto& rec : history)
    for (std::size_t p = 0; p < rec.positions.size(); ++p)
      out += std::to_string(rec.iteration) + "," + std::to_string(p) + "," +
             fd(rec.positions[p][0]) + "," + fd(rec.positions[p][1]) + "," +
             fd(rec.losses[p]) + "," + fd(rec.g_best_loss) + "\n";
  return out;
}

std::vector<IterationRecord> history_from_csv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() ||
      lines[0] != "iteration,particle,by_t,bz_t,loss,g_best_loss")
    throw ConfigError("history csv: unexpected header");
  // g_best positions are not part of this export; records carry the
  // per-particle data and the running best loss only.
  std::vector<IterationRecord> history;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i]);
    if (fields.size() != 6)
      throw ConfigError("history csv: row " + std::to_string(i) +
                        " needs 6 fields");
    const int iteration =
        static_cast<int>(parse_number(fields[0], "history csv"));
    if (history.empty() || history.back().iteration != iteration) {
      IterationRecord rec;
      rec.iteration = iteration;
      history.push_back(rec);
    }
    auto& rec = history.back();
    rec.positions.push_back({parse_number(fields[2], "history csv"),
                             parse_number(fields[3], "history csv")});
    rec.losses.push_back(parse_number(fields[4], "history csv"));
    rec.g_best_loss = parse_number(fields[5], "history csv");
  }
  return history;
}

std::string to_json_string(const TripletFit& fit, int indent) {
  json j;
  j["baseline_v"] = fit.baseline_v;
  j["centers_hz"] = fit.centers_hz;
  j["contrasts"] = fit.contrasts;
  j["converged"] = fit.converged;
  j["linewidths_hz"] = fit.linewidths_hz;
  j["residual_rms_v"] = fit.residual_rms_v;
  return j.dump(indent) + "\n";
}

TripletFit triplet_fit_from_json(std::string_view text) {
  const json j = parse_json(text, "triplet fit json");
  TripletFit fit;
  fit.centers_hz = get_array<double, 3>(j, "centers_hz", "triplet fit json");
  fit.linewidths_hz =
      get_array<double, 3>(j, "linewidths_hz", "triplet fit json");
  fit.contrasts = get_array<double, 3>(j, "contrasts", "triplet fit json");
  fit.baseline_v = get_field<double>(j, "baseline_v", "triplet fit json");
  fit.residual_rms_v =
      get_field<double>(j, "residual_rms_v", "triplet fit json");
  fit.converged = get_field<bool>(j, "converged", "triplet fit json");
  return fit;
}

std::string to_json_string(const SlopeFit& fit, int indent) {
  json j;
  j["r_squared"] = fit.r_squared;
  j["slope_v_per_hz"] = fit.slope_v_per_hz;
  j["window_hi_hz"] = fit.window_hi_hz;
  j["window_lo_hz"] = fit.window_lo_hz;
  j["zero_crossing_hz"] = fit.zero_crossing_hz;
  return j.dump(indent) + "\n";
}

SlopeFit slope_fit_from_json(std::string_view text) {
  const json j = parse_json(text, "slope fit json");
  SlopeFit fit;
  fit.zero_crossing_hz =
      get_field<double>(j, "zero_crossing_hz", "slope fit json");
  fit.slope_v_per_hz =
      get_field<double>(j, "slope_v_per_hz", "slope fit json");
  fit.window_lo_hz = get_field<double>(j, "window_lo_hz", "slope fit json");
  fit.window_hi_hz = get_field<double>(j, "window_hi_hz", "slope fit json");
  fit.r_squared = get_field<double>(j, "r_squared", "slope fit json");
  return fit;
}

std::string to_json_string(const SensitivityReport& report, int indent) {
  json j;
  j["band_hi_hz"] = report.band_hi_hz;
  j["band_lo_hz"] = report.band_lo_hz;
  j["electronic_floor_t_rthz"] = report.electronic_floor_t_rthz;
  j["enbw_hz"] = report.enbw_hz;
  j["field_sensitivity_t_rthz"] = report.field_sensitivity_t_rthz;
  j["mode"] = report.mode;
  j["n_records"] = report.n_records;
  j["response_v_per_t"] = report.response_v_per_t;
  j["slope_v_per_hz"] = report.slope_v_per_hz;
  j["voltage_noise_v_rthz"] = report.voltage_noise_v_rthz;
  return j.dump(indent) + "\n";
}

SensitivityReport sensitivity_report_from_json(std::string_view text) {
  const json j = parse_json(text, "sensitivity json");
  SensitivityReport r;
  r.mode = get_field<std::string>(j, "mode", "sensitivity json");
  r.slope_v_per_hz =
      get_field<double>(j, "slope_v_per_hz", "sensitivity json");
  r.response_v_per_t =
      get_field<double>(j, "response_v_per_t", "sensitivity json");
  r.voltage_noise_v_rthz =
      get_field<double>(j, "voltage_noise_v_rthz", "sensitivity json");
  r.field_sensitivity_t_rthz =
      get_field<double>(j, "field_sensitivity_t_rthz", "sensitivity json");
  r.electronic_floor_t_rthz =
      get_field<double>(j, "electronic_floor_t_rthz", "sensitivity json");
  r.band_lo_hz = get_field<double>(j, "band_lo_hz", "sensitivity json");
  r.band_hi_hz = get_field<double>(j, "band_hi_hz", "sensitivity json");
  r.enbw_hz = get_field<double>(j, "enbw_hz", "sensitivity json");
  r.n_records = get_field<int>(j, "n_records", "sensitivity json");
  return r;
}

std::string to_json_string(const CalibrationResult& result, int indent) {
  json j;
  j["best_field_t"] = {result.best_field.bx_t, result.best_field.by_t,
                       result.best_field.bz_t};
  j["best_loss"] = result.best_loss;
  j["converged"] = result.converged;
  j["iterations"] = result.iterations;
  return j.dump(indent) + "\n";
}

CalibrationResult calibration_result_from_json(std::string_view text) {
  const json j = parse_json(text, "calibration json");
  CalibrationResult r;
  const auto field =
      get_array<double, 3>(j, "best_field_t", "calibration json");
  r.best_field = BiasField{field[0], field[1], field[2]};
  r.best_loss = get_field<double>(j, "best_loss", "calibration json");
  r.converged = get_field<bool>(j, "converged", "calibration json");
  r.iterations = get_field<int>(j, "iterations", "calibration json");
  // The iteration history travels in its own CSV artifact.
  return r;
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace nvcalib::io
