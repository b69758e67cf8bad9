#include "nvcalib/remote.hpp"

#include <netdb.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <thread>

#include "nvcalib/errors.hpp"
#include "nvcalib/protocol.hpp"

namespace nvcalib {

namespace {

[[noreturn]] void fail_transport(const std::string& what) {
  throw ProviderError(ProviderFault::timeout, what);
}

[[noreturn]] void fail_protocol(const std::string& what) {
  throw ProviderError(ProviderFault::protocol, what);
}

timeval to_timeval(double seconds) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(seconds);
  tv.tv_usec = static_cast<suseconds_t>((seconds - tv.tv_sec) * 1e6);
  if (tv.tv_sec == 0 && tv.tv_usec == 0) tv.tv_usec = 1;
  return tv;
}

}  // namespace

RemoteProvider::RemoteProvider(std::string host, int port,
                               RemoteOptions options)
    : host_(std::move(host)), port_(port), options_(options) {
  if (host_.empty() || port_ <= 0 || port_ > 65535)
    throw std::invalid_argument("remote endpoint needs a host and a port");
  if (!(options_.timeout_s > 0.0) || !(options_.settle_time_s >= 0.0) ||
      !(options_.max_field_t > 0.0))
    throw std::invalid_argument("bad remote options");
}

RemoteProvider::~RemoteProvider() { close_socket(); }

void RemoteProvider::close_socket() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
  rx_buffer_.clear();
}

void RemoteProvider::ensure_connected() {
  if (fd_ >= 0) return;
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  const std::string port_str = std::to_string(port_);
  if (::getaddrinfo(host_.c_str(), port_str.c_str(), &hints, &result) != 0)
    fail_transport("cannot resolve host '" + host_ + "'");

  int fd = -1;
  for (addrinfo* ai = result; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    const timeval tv = to_timeval(options_.timeout_s);
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(result);
  if (fd < 0)
    fail_transport("cannot connect to " + host_ + ":" + port_str);
  fd_ = fd;
  rx_buffer_.clear();
}

void RemoteProvider::send_line(const std::string& line) {
  ensure_connected();
  std::size_t sent = 0;
  while (sent < line.size()) {
    const ssize_t n =
        ::send(fd_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) {
      const int err = errno;
      close_socket();
      fail_transport(std::string("send failed: ") + std::strerror(err));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::string RemoteProvider::recv_line() {
  for (;;) {
    const std::size_t eol = rx_buffer_.find('\n');
    if (eol != std::string::npos) {
      std::string line = rx_buffer_.substr(0, eol);
      rx_buffer_.erase(0, eol + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    char chunk[4096];
    const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n > 0) {
      rx_buffer_.append(chunk, static_cast<std::size_t>(n));
      continue;
    }
    if (n == 0) {
      close_socket();
      fail_protocol("connection closed mid-reply");
    }
    const int err = errno;
    close_socket();
    if (err == EAGAIN || err == EWOULDBLOCK)
      fail_transport("timed out waiting for a reply");
    fail_transport(std::string("recv failed: ") + std::strerror(err));
  }
}

ProviderDescriptor RemoteProvider::descriptor() const {
  ProviderDescriptor d;
  d.kind = ProviderDescriptor::Kind::remote;
  d.concurrency_safe = false;
  d.settle_time_s = options_.settle_time_s;
  d.max_field_t = options_.max_field_t;
  return d;
}

void RemoteProvider::set_field(const BiasField& field) {
  try {
    field.validate(options_.max_field_t);
  } catch (const std::invalid_argument& e) {
    throw ProviderError(ProviderFault::range, e.what());
  }
  protocol::SetFieldCmd cmd{field.bx_t, field.by_t, field.bz_t};
  send_line(protocol::serialize(cmd));
  const auto head = protocol::parse_response_head(recv_line());
  if (const auto* err = std::get_if<protocol::ErrResp>(&head)) {
    if (err->code == "range")
      throw ProviderError(ProviderFault::range, err->message);
    fail_protocol("instrument rejected SETFIELD: " + err->code + " " +
                  err->message);
  }
  if (!std::holds_alternative<protocol::OkResp>(head))
    fail_protocol("SETFIELD expects OK");
  current_ = field;
  if (options_.settle_time_s > 0.0)
    std::this_thread::sleep_for(
        std::chrono::duration<double>(options_.settle_time_s));
}

Sweep RemoteProvider::acquire(const SweepRequest& request) {
  request.validate();
  if (request.field) set_field(*request.field);

  protocol::SweepCmd cmd{request.f_start_hz, request.f_stop_hz,
                         request.n_points, request.mode};
  send_line(protocol::serialize(cmd));
  const auto head = protocol::parse_response_head(recv_line());
  if (const auto* err = std::get_if<protocol::ErrResp>(&head)) {
    if (err->code == "range")
      throw ProviderError(ProviderFault::range, err->message);
    fail_protocol("instrument rejected SWEEP: " + err->code + " " +
                  err->message);
  }
  const auto* data = std::get_if<protocol::DataHeader>(&head);
  if (data == nullptr) fail_protocol("SWEEP expects a DATA reply");
  if (data->n_points != request.n_points)
    fail_protocol("instrument returned " + std::to_string(data->n_points) +
                  " points for a " + std::to_string(request.n_points) +
                  "-point request");

  Sweep sweep;
  sweep.freqs_hz.reserve(request.n_points);
  sweep.values_v.reserve(request.n_points);
  for (int i = 0; i < request.n_points; ++i) {
    const auto point = protocol::parse_data_point(recv_line());
    sweep.freqs_hz.push_back(point.freq_hz);
    sweep.values_v.push_back(point.value_v);
  }
  try {
    sweep.validate();
  } catch (const std::invalid_argument& e) {
    fail_protocol(std::string("bad sweep payload: ") + e.what());
  }

  // The returned grid must be the requested one: exact endpoints and
  // uniform spacing to within a unit in the last place per point.
  const auto expected = uniform_grid(request.f_start_hz, request.f_stop_hz,
                                     request.n_points);
  for (int i = 0; i < request.n_points; ++i) {
    const double want = expected[i];
    const double got = sweep.freqs_hz[i];
    const double ulp =
        std::nextafter(std::abs(want), std::numeric_limits<double>::max()) -
        std::abs(want);
    if (std::abs(got - want) > ulp)
      fail_protocol("instrument grid deviates from the requested window");
  }

  sweep.meta.field = request.field ? *request.field : current_;
  sweep.meta.mode = to_string(request.mode);
  sweep.meta.mod_depth_hz = request.mod_depth_hz;
  sweep.meta.three_tone = request.three_tone.value_or(false);
  return sweep;
}

}  // namespace nvcalib
