#pragma once

// Shared helpers for the test suites. Kept doctest-free so they can also be
// used by the acceptance runner.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvcalib/physics.hpp"

namespace testsupport {

/// Self-cleaning scratch directory.
class TempDir {
 public:
  TempDir() {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "nvcalib_XXXXXX").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (::mkdtemp(buf.data()) == nullptr)
      throw std::runtime_error("mkdtemp failed");
    path_ = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const {
    return (std::filesystem::path(path_) / name).string();
  }

 private:
  std::string path_;
};

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

/// Path of the command-line binary under test, exported by ctest.
inline std::string cli_binary() {
  const char* bin = std::getenv("NVCALIB_CLI");
  if (bin == nullptr || *bin == '\0')
    throw std::runtime_error("NVCALIB_CLI is not set; run under ctest");
  return bin;
}

/// Run the tool through the shell. `env_prefix` may carry variable
/// assignments or `env -u NAME` to run with a scrubbed environment.
inline CliResult run_cli(const std::string& args,
                         const std::string& env_prefix = "") {
  std::string cmd = env_prefix.empty() ? "" : env_prefix + " ";
  cmd += cli_binary() + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) throw std::runtime_error("popen failed");
  CliResult r;
  char chunk[4096];
  std::size_t n = 0;
  while ((n = std::fread(chunk, 1, sizeof chunk, pipe)) > 0)
    r.output.append(chunk, n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

/// Number of distinct dips: contiguous runs of samples deeper than
/// `depth_fraction` of the background level.
inline int count_dips(const nvcalib::Sweep& s, double depth_fraction) {
  const double base =
      *std::max_element(s.values_v.begin(), s.values_v.end());
  const double threshold = base * (1.0 - depth_fraction);
  int count = 0;
  bool below = false;
  for (double v : s.values_v) {
    const bool b = v < threshold;
    if (b && !below) ++count;
    below = b;
  }
  return count;
}

/// Number of dip clusters: dip center frequencies merged when closer than
/// `gap_hz`. Distinguishes resolved orientation groups from their hyperfine
/// substructure.
inline int count_groups(const nvcalib::Sweep& s, double depth_fraction,
                        double gap_hz) {
  const double base =
      *std::max_element(s.values_v.begin(), s.values_v.end());
  const double threshold = base * (1.0 - depth_fraction);
  std::vector<double> centers;
  bool below = false;
  double best_v = 0.0, best_f = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool b = s.values_v[i] < threshold;
    if (b && (!below || s.values_v[i] < best_v)) {
      best_v = s.values_v[i];
      best_f = s.freqs_hz[i];
    }
    if (!b && below) centers.push_back(best_f);
    below = b;
  }
  if (below) centers.push_back(best_f);
  int groups = 0;
  double last = -1.0;
  for (double c : centers) {
    if (groups == 0 || c - last > gap_hz) ++groups;
    last = c;
  }
  return groups;
}

}  // namespace testsupport
