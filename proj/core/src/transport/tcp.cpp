#include "taskcomm/transport/tcp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>

#include "matching.hpp"

namespace taskcomm::transport {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw TransportIoError(what + ": " + std::strerror(errno));
}

void write_all(int fd, const void* data, std::size_t size) {
  const auto* p = static_cast<const char*>(data);
  while (size > 0) {
    const ssize_t n = ::send(fd, p, size, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("send");
    }
    p += n;
    size -= static_cast<std::size_t>(n);
  }
}

// False on orderly EOF before any byte; throws on a torn read.
bool read_all(int fd, void* data, std::size_t size) {
  auto* p = static_cast<char*>(data);
  std::size_t got = 0;
  while (got < size) {
    const ssize_t n = ::recv(fd, p + got, size - got, 0);
    if (n == 0) {
      if (got == 0) return false;
      throw TransportIoError("connection closed mid-frame");
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("recv");
    }
    got += static_cast<std::size_t>(n);
  }
  return true;
}

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), nullptr, &hints, &res); rc != 0 || res == nullptr) {
    throw TransportIoError("cannot resolve host '" + host + "': " + ::gai_strerror(rc));
  }
  sockaddr_in addr = *reinterpret_cast<sockaddr_in*>(res->ai_addr);
  ::freeaddrinfo(res);
  addr.sin_port = htons(port);
  return addr;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

void write_rank(int fd, int rank) {
  std::byte buf[4];
  const auto v = static_cast<std::uint32_t>(rank);
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<std::byte>((v >> (8 * i)) & 0xFFu);
  write_all(fd, buf, sizeof(buf));
}

int read_rank(int fd) {
  std::byte buf[4];
  if (!read_all(fd, buf, sizeof(buf))) throw TransportIoError("peer closed during handshake");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::to_integer<std::uint32_t>(buf[i]) << (8 * i);
  return static_cast<int>(v);
}

}  // namespace

std::vector<HostPort> parse_hostfile(std::istream& in) {
  std::vector<HostPort> hosts;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string entry = line.substr(first, last - first + 1);
    const auto colon = entry.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == entry.size()) {
      throw ConfigError("hostfile line " + std::to_string(lineno) + ": expected host:port");
    }
    int port = 0;
    try {
      std::size_t used = 0;
      port = std::stoi(entry.substr(colon + 1), &used);
      if (used != entry.size() - colon - 1) port = -1;
    } catch (const std::exception&) {
      port = -1;
    }
    if (port <= 0 || port > 65535) {
      throw ConfigError("hostfile line " + std::to_string(lineno) + ": invalid port");
    }
    hosts.push_back({entry.substr(0, colon), static_cast<std::uint16_t>(port)});
  }
  return hosts;
}

std::vector<HostPort> read_hostfile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open hostfile '" + path + "'");
  return parse_hostfile(in);
}

// ---------------------------------------------------------------------------

TcpListener TcpListener::bind(const std::string& host, std::uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw_errno("socket");
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = resolve(host, port);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(fd);
    throw_errno("bind " + host + ":" + std::to_string(port));
  }
  if (::listen(fd, 64) < 0) {
    ::close(fd);
    throw_errno("listen");
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  return TcpListener(fd, ntohs(addr.sin_port));
}

TcpListener::TcpListener(TcpListener&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)), port_(other.port_) {}

TcpListener& TcpListener::operator=(TcpListener&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(other.fd_, -1);
    port_ = other.port_;
  }
  return *this;
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

int TcpListener::release() noexcept { return std::exchange(fd_, -1); }

// ---------------------------------------------------------------------------

TcpEndpoint::TcpEndpoint(int rank, const std::vector<HostPort>& hosts,
                         std::chrono::milliseconds connect_timeout)
    : TcpEndpoint(rank, hosts,
                  TcpListener::bind("0.0.0.0", hosts.at(static_cast<std::size_t>(rank)).port),
                  connect_timeout) {}

TcpEndpoint::TcpEndpoint(int rank, const std::vector<HostPort>& hosts, TcpListener listener,
                         std::chrono::milliseconds connect_timeout)
    : Endpoint(rank, static_cast<int>(hosts.size())) {
  peers_.resize(hosts.size());
  for (auto& p : peers_) p = std::make_unique<Peer>();
  connect_all(hosts, std::move(listener), connect_timeout);
  for (int peer = 0; peer < size(); ++peer) {
    if (peer == this->rank()) continue;
    peers_[static_cast<std::size_t>(peer)]->reader = std::thread([this, peer] { reader_loop(peer); });
  }
}

void TcpEndpoint::connect_all(const std::vector<HostPort>& hosts, TcpListener listener,
                              std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  // Lower ranks accept, higher ranks connect.
  for (int peer = 0; peer < rank(); ++peer) {
    const auto& hp = hosts[static_cast<std::size_t>(peer)];
    const sockaddr_in addr = resolve(hp.host, hp.port);
    for (;;) {
      const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
      if (fd < 0) throw_errno("socket");
      if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0) {
        set_nodelay(fd);
        write_rank(fd, rank());
        peers_[static_cast<std::size_t>(peer)]->fd = fd;
        break;
      }
      ::close(fd);
      if (std::chrono::steady_clock::now() > deadline) {
        throw TransportIoError("timed out connecting to rank " + std::to_string(peer) + " at " +
                               hp.host + ":" + std::to_string(hp.port));
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  }
  const int lfd = listener.release();
  for (int accepted = rank() + 1; accepted < size(); ++accepted) {
    const int fd = ::accept(lfd, nullptr, nullptr);
    if (fd < 0) {
      ::close(lfd);
      throw_errno("accept");
    }
    set_nodelay(fd);
    const int peer = read_rank(fd);
    if (peer <= rank() || peer >= size() || peers_[static_cast<std::size_t>(peer)]->fd >= 0) {
      ::close(fd);
      ::close(lfd);
      throw TransportIoError("unexpected handshake from rank " + std::to_string(peer));
    }
    peers_[static_cast<std::size_t>(peer)]->fd = fd;
  }
  ::close(lfd);
}

TcpEndpoint::~TcpEndpoint() {
  closing_.store(true);
  for (auto& p : peers_) {
    if (p->fd >= 0) ::shutdown(p->fd, SHUT_RDWR);
  }
  for (auto& p : peers_) {
    if (p->reader.joinable()) p->reader.join();
    if (p->fd >= 0) ::close(p->fd);
  }
}

void TcpEndpoint::write_frame(int peer, const FrameHeader& header,
                              std::span<const std::byte> payload) {
  auto& p = *peers_[static_cast<std::size_t>(peer)];
  const auto prefix = encode_frame_prefix(header);
  std::lock_guard lock(p.write_mutex);
  write_all(p.fd, prefix.data(), prefix.size());
  if (!payload.empty()) write_all(p.fd, payload.data(), payload.size());
}

void TcpEndpoint::route(Envelope&& envelope, std::function<void()> on_matched) {
  if (envelope.dest == rank()) {
    inbox().deliver(std::move(envelope), std::move(on_matched));
    return;
  }
  FrameHeader header{.payload_length = static_cast<std::uint32_t>(envelope.payload.size()),
                     .source = envelope.source,
                     .dest = envelope.dest,
                     .tag = envelope.tag,
                     .comm = envelope.comm,
                     .flags = envelope.synchronous ? frame_flags::kSynchronous : 0u};
  if (envelope.synchronous) {
    // Registered before the frame leaves: the ack may arrive immediately.
    std::lock_guard lock(acks_mutex_);
    pending_acks_[{envelope.dest, envelope.tag, envelope.comm}].push_back(std::move(on_matched));
  }
  write_frame(envelope.dest, header, envelope.payload);
}

void TcpEndpoint::reader_loop(int peer) {
  const int fd = peers_[static_cast<std::size_t>(peer)]->fd;
  try {
    for (;;) {
      std::array<std::byte, kFramePrefixSize> prefix;
      if (!read_all(fd, prefix.data(), prefix.size())) return;
      const FrameHeader h = decode_frame_prefix(prefix);
      if (h.flags & frame_flags::kAck) {
        std::function<void()> callback;
        {
          std::lock_guard lock(acks_mutex_);
          auto& q = pending_acks_[{peer, h.tag, h.comm}];
          if (q.empty()) throw TransportIoError("unexpected ack from rank " + std::to_string(peer));
          callback = std::move(q.front());
          q.pop_front();
        }
        callback();
        continue;
      }
      Envelope env{.source = h.source,
                   .dest = h.dest,
                   .tag = h.tag,
                   .comm = h.comm,
                   .synchronous = (h.flags & frame_flags::kSynchronous) != 0,
                   .payload = std::vector<std::byte>(h.payload_length)};
      if (h.payload_length > 0 && !read_all(fd, env.payload.data(), env.payload.size())) {
        throw TransportIoError("connection closed mid-frame");
      }
      std::function<void()> ack;
      if (env.synchronous) {
        ack = [this, peer, tag = h.tag, comm = h.comm] {
          write_frame(peer, {.payload_length = 0,
                             .source = rank(),
                             .dest = peer,
                             .tag = tag,
                             .comm = comm,
                             .flags = frame_flags::kAck},
                      {});
        };
      }
      inbox().deliver(std::move(env), std::move(ack));
    }
  } catch (const TransportIoError&) {
    if (!closing_.load()) abort();
  }
}

std::vector<std::unique_ptr<TcpEndpoint>> make_local_tcp_group(int size) {
  std::vector<TcpListener> listeners;
  std::vector<HostPort> hosts;
  for (int r = 0; r < size; ++r) {
    listeners.push_back(TcpListener::bind("127.0.0.1", 0));
    hosts.push_back({"127.0.0.1", listeners.back().port()});
  }
  std::vector<std::unique_ptr<TcpEndpoint>> group(static_cast<std::size_t>(size));
  std::vector<std::thread> builders;
  std::mutex error_mutex;
  std::exception_ptr error;
  for (int r = 0; r < size; ++r) {
    builders.emplace_back([&, r] {
      try {
        group[static_cast<std::size_t>(r)] = std::make_unique<TcpEndpoint>(
            r, hosts, std::move(listeners[static_cast<std::size_t>(r)]));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : builders) t.join();
  if (error) std::rethrow_exception(error);
  return group;
}

}  // namespace taskcomm::transport
