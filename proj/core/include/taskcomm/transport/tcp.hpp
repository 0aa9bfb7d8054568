#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <deque>
#include <tuple>
#include <vector>

#include "taskcomm/transport/frame.hpp"
#include "taskcomm/transport/transport.hpp"

namespace taskcomm::transport {

struct HostPort {
  std::string host;
  std::uint16_t port = 0;

  friend bool operator==(const HostPort&, const HostPort&) = default;
};

/// One `host:port` per line; line i is rank i. Blank lines and lines starting
/// with '#' are ignored.
std::vector<HostPort> parse_hostfile(std::istream& in);
std::vector<HostPort> read_hostfile(const std::string& path);

/// A bound, listening socket.
class TcpListener {
 public:
  static TcpListener bind(const std::string& host, std::uint16_t port);

  TcpListener(TcpListener&& other) noexcept;
  TcpListener& operator=(TcpListener&& other) noexcept;
  ~TcpListener();

  std::uint16_t port() const noexcept { return port_; }
  int release() noexcept;

 private:
  TcpListener(int fd, std::uint16_t port) : fd_(fd), port_(port) {}
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

/// One rank of a TCP-connected group: one connection per peer, one reader
/// thread per connection.
class TcpEndpoint final : public Endpoint {
 public:
  TcpEndpoint(int rank, const std::vector<HostPort>& hosts,
              std::chrono::milliseconds connect_timeout = std::chrono::seconds(30));
  TcpEndpoint(int rank, const std::vector<HostPort>& hosts, TcpListener listener,
              std::chrono::milliseconds connect_timeout = std::chrono::seconds(30));
  ~TcpEndpoint() override;

 protected:
  void route(Envelope&& envelope, std::function<void()> on_matched) override;

 private:
  struct Peer {
    int fd = -1;
    std::mutex write_mutex;
    std::thread reader;
  };
  using AckKey = std::tuple<int, int, int>;  // (peer, tag, comm)

  void connect_all(const std::vector<HostPort>& hosts, TcpListener listener,
                   std::chrono::milliseconds timeout);
  void reader_loop(int peer);
  void write_frame(int peer, const FrameHeader& header, std::span<const std::byte> payload);

  std::vector<std::unique_ptr<Peer>> peers_;
  std::mutex acks_mutex_;
  std::map<AckKey, std::deque<std::function<void()>>> pending_acks_;
  std::atomic<bool> closing_{false};
};

/// `size` endpoints on 127.0.0.1 ephemeral ports, connected to each other.
std::vector<std::unique_ptr<TcpEndpoint>> make_local_tcp_group(int size);

}  // namespace taskcomm::transport
