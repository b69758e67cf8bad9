#pragma once

#include <string>
#include <string_view>

#include "nvcalib/fitting.hpp"
#include "nvcalib/physics.hpp"
#include "nvcalib/pso.hpp"
#include "nvcalib/sensitivity.hpp"

namespace nvcalib::io {

/// CSV with header "frequency_hz,signal_v", LF line endings, shortest
/// round-trip number formatting. Writing then parsing is lossless.
std::string sweep_to_csv(const Sweep& sweep);
Sweep sweep_from_csv(std::string_view text);

/// CSV with header "frequency_hz,asd_v_per_rthz".
std::string spectrum_to_csv(const NoiseSpectrum& spectrum);
NoiseSpectrum spectrum_from_csv(std::string_view text);

/// CSV with header "iteration,particle,by_t,bz_t,loss,g_best_loss", one row
/// per particle evaluation.
std::string history_to_csv(const std::vector<IterationRecord>& history);
std::vector<IterationRecord> history_from_csv(std::string_view text);

/// JSON round-trips for result records (snake_case keys, sorted).
std::string to_json_string(const TripletFit& fit, int indent = 2);
TripletFit triplet_fit_from_json(std::string_view text);

std::string to_json_string(const SlopeFit& fit, int indent = 2);
SlopeFit slope_fit_from_json(std::string_view text);

std::string to_json_string(const SensitivityReport& report, int indent = 2);
SensitivityReport sensitivity_report_from_json(std::string_view text);

std::string to_json_string(const CalibrationResult& result, int indent = 2);
CalibrationResult calibration_result_from_json(std::string_view text);

/// Filesystem helpers shared by the command-line tool and tests.
void write_file(const std::string& path, std::string_view content);
std::string read_file(const std::string& path);

}  // namespace nvcalib::io
