#pragma once

#include <string>

#include "nvcalib/provider.hpp"

namespace nvcalib {

struct RemoteOptions {
  /// Socket timeout applied to connects, sends and each received line.
  double timeout_s = 5.0;
  /// Wait after a confirmed field change before returning, seconds.
  double settle_time_s = 0.05;
  double max_field_t = 10e-3;
};

/// Client for a remote sweep instrument speaking the line protocol over
/// TCP. All failures surface as ProviderError: transport failures and
/// socket timeouts as `timeout`, malformed traffic or unexpected replies
/// as `protocol`, and instrument-rejected fields as `range`.
class RemoteProvider : public SweepProvider {
 public:
  RemoteProvider(std::string host, int port, RemoteOptions options = {});
  ~RemoteProvider() override;

  RemoteProvider(const RemoteProvider&) = delete;
  RemoteProvider& operator=(const RemoteProvider&) = delete;

  ProviderDescriptor descriptor() const override;
  void set_field(const BiasField& field) override;
  Sweep acquire(const SweepRequest& request) override;

 private:
  void ensure_connected();
  void send_line(const std::string& line);
  std::string recv_line();
  void close_socket();

  std::string host_;
  int port_;
  RemoteOptions options_;
  int fd_ = -1;
  std::string rx_buffer_;
  BiasField current_{};
};

}  // namespace nvcalib
