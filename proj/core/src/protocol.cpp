#include "nvcalib/protocol.hpp"

#include <charconv>
#include <cmath>

#include "nvcalib/errors.hpp"

namespace nvcalib::protocol {

namespace {

[[noreturn]] void bad(const std::string& what) {
  throw ProviderError(ProviderFault::protocol, what);
}

std::string_view strip_newline(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::vector<std::string_view> split_tokens(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    const std::size_t next = line.find(' ', pos);
    if (next == std::string_view::npos) {
      tokens.push_back(line.substr(pos));
      break;
    }
    tokens.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
  return tokens;
}

int parse_int(std::string_view token) {
  int v = 0;
  const auto [p, ec] = std::from_chars(token.begin(), token.end(), v);
  if (ec != std::errc{} || p != token.end())
    bad("malformed integer token: '" + std::string(token) + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

double parse_double(std::string_view token) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(token.begin(), token.end(), v);
  if (ec != std::errc{} || p != token.end())
    bad("malformed number token: '" + std::string(token) + "'");
  if (!std::isfinite(v))
    bad("non-finite number on the wire: '" + std::string(token) + "'");
  return v;
}

std::string serialize(const SetFieldCmd& c) {
  return "SETFIELD " + format_double(c.bx_t) + " " + format_double(c.by_t) +
         " " + format_double(c.bz_t) + "\n";
}

std::string serialize(const SweepCmd& c) {
  return "SWEEP " + format_double(c.f_start_hz) + " " +
         format_double(c.f_stop_hz) + " " + std::to_string(c.n_points) + " " +
         to_string(c.mode) + "\n";
}

std::string serialize(const Request& r) {
  return std::visit([](const auto& c) { return serialize(c); }, r);
}

std::string serialize(const OkResp&) { return "OK\n"; }

std::string serialize(const DataHeader& h) {
  return "DATA " + std::to_string(h.n_points) + "\n";
}

std::string serialize(const ErrResp& e) {
  if (e.message.empty()) return "ERR " + e.code + "\n";
  return "ERR " + e.code + " " + e.message + "\n";
}

std::string serialize(const ResponseHead& r) {
  return std::visit([](const auto& c) { return serialize(c); }, r);
}

std::string serialize(const DataPoint& p) {
  return format_double(p.freq_hz) + " " + format_double(p.value_v) + "\n";
}

Request parse_request(std::string_view line) {
  const auto tokens = split_tokens(strip_newline(line));
  if (tokens.empty()) bad("empty request line");
  if (tokens[0] == "SETFIELD") {
    if (tokens.size() != 4) bad("SETFIELD expects exactly 3 field tokens");
    SetFieldCmd c;
    c.bx_t = parse_double(tokens[1]);
    c.by_t = parse_double(tokens[2]);
    c.bz_t = parse_double(tokens[3]);
    return c;
  }
  if (tokens[0] == "SWEEP") {
    if (tokens.size() != 5)
      bad("SWEEP expects f_start, f_stop, n_points and mode");
    SweepCmd c;
    c.f_start_hz = parse_double(tokens[1]);
    c.f_stop_hz = parse_double(tokens[2]);
    c.n_points = parse_int(tokens[3]);
    if (c.n_points < 1) bad("SWEEP needs a positive point count");
    if (tokens[4] == "cw") {
      c.mode = SweepMode::cw;
    } else if (tokens[4] == "lockin") {
      c.mode = SweepMode::lockin;
    } else {
      bad("unknown sweep mode token: '" + std::string(tokens[4]) + "'");
    }
    return c;
  }
  bad("unknown request verb: '" + std::string(tokens[0]) + "'");
}

ResponseHead parse_response_head(std::string_view line) {
  const auto stripped = strip_newline(line);
  const auto tokens = split_tokens(stripped);
  if (tokens.empty()) bad("empty response line");
  if (tokens[0] == "OK") {
    if (tokens.size() != 1) bad("OK carries no arguments");
    return OkResp{};
  }
  if (tokens[0] == "DATA") {
    if (tokens.size() != 2) bad("DATA expects exactly one count token");
    DataHeader h;
    h.n_points = parse_int(tokens[1]);
    if (h.n_points < 1) bad("DATA needs a positive point count");
    return h;
  }
  if (tokens[0] == "ERR") {
    if (tokens.size() < 2) bad("ERR expects a code");
    ErrResp e;
    e.code = std::string(tokens[1]);
    if (e.code.empty()) bad("ERR code must not be empty");
    const std::size_t head = 4 + e.code.size();  // "ERR " + code
    e.message = head < stripped.size()
                    ? std::string(stripped.substr(head + 1))
                    : std::string();
    return e;
  }
  bad("unknown response head: '" + std::string(tokens[0]) + "'");
}

DataPoint parse_data_point(std::string_view line) {
  const auto tokens = split_tokens(strip_newline(line));
  if (tokens.size() != 2) bad("data point expects two tokens");
  DataPoint p;
  p.freq_hz = parse_double(tokens[0]);
  p.value_v = parse_double(tokens[1]);
  return p;
}

}  // namespace nvcalib::protocol
