#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "nvcalib/provider.hpp"

namespace nvcalib::protocol {

/// Line-oriented text protocol spoken to remote sweep instruments.
/// Every message is a single LF-terminated line of space-separated tokens;
/// floating point numbers use shortest round-trip decimal form with '.'
/// regardless of locale:
///
///   -> SETFIELD <bx_t> <by_t> <bz_t>
///   <- OK | ERR <code> <message...>
///   -> SWEEP <f_start_hz> <f_stop_hz> <n_points> <cw|lockin>
///   <- DATA <n_points> followed by n_points lines "<freq_hz> <value_v>"
///      | ERR <code> <message...>

struct SetFieldCmd {
  double bx_t = 0.0, by_t = 0.0, bz_t = 0.0;
};

struct SweepCmd {
  double f_start_hz = 0.0;
  double f_stop_hz = 0.0;
  int n_points = 0;
  SweepMode mode = SweepMode::cw;
};

using Request = std::variant<SetFieldCmd, SweepCmd>;

struct OkResp {};

struct DataHeader {
  int n_points = 0;
};

struct ErrResp {
  std::string code;
  std::string message;
};

using ResponseHead = std::variant<OkResp, DataHeader, ErrResp>;

struct DataPoint {
  double freq_hz = 0.0;
  double value_v = 0.0;
};

/// Canonical decimal form: shortest representation that round-trips.
std::string format_double(double v);
double parse_double(std::string_view token);

std::string serialize(const SetFieldCmd& c);
std::string serialize(const SweepCmd& c);
std::string serialize(const Request& r);
std::string serialize(const OkResp&);
std::string serialize(const DataHeader& h);
std::string serialize(const ErrResp& e);
std::string serialize(const ResponseHead& r);
std::string serialize(const DataPoint& p);

/// Parse one request line (without or with its trailing newline).
/// Malformed input raises ProviderError{protocol}.
Request parse_request(std::string_view line);

/// Parse one response head line: OK, DATA <n> or ERR <code> <message>.
ResponseHead parse_response_head(std::string_view line);

/// Parse one "<freq> <value>" payload line.
DataPoint parse_data_point(std::string_view line);

}  // namespace nvcalib::protocol
