#pragma once

// Socket-meter line protocol for live runs: newline-delimited UTF-8 JSON over
// TCP, one record per sample:
//
//   {"power_w": <float>, "ts_ms": <integer>}

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <memory>
#include <string>
#include <string_view>
#include <thread>
#include <utility>

#include <json.hpp>

#include "gridcalib/csv.hpp"
#include "gridcalib/error.hpp"
#include "gridcalib/timeseries.hpp"

namespace gridcalib::meter_link {

struct MeterRecord {
  Watts power_w = 0.0;
  TimestampMs ts_ms = 0;
};

inline std::string format_record(const MeterRecord& r) {
  return "{\"power_w\": " + format_double(r.power_w) + ", \"ts_ms\": " + std::to_string(r.ts_ms) +
         "}\n";
}

inline MeterRecord parse_record(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("meter record: ") + e.what());
  }
  if (!j.is_object() || !j.contains("power_w") || !j.contains("ts_ms") ||
      !j["power_w"].is_number() || !j["ts_ms"].is_number_integer()) {
    throw Error(ErrorKind::ParseError, "meter record needs numeric power_w and integer ts_ms");
  }
  return {j["power_w"].get<double>(), j["ts_ms"].get<TimestampMs>()};
}

/// Owns a file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Socket() { reset(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

/// Accepts meter connections on host:port (port 0 picks a free one) and
/// appends every valid record to a gauge series. Records that fail to parse
/// or go back in time are counted and dropped.
class MeterListener {
 public:
  MeterListener(std::shared_ptr<timeseries::MetricStore> store, std::string metric,
                const std::string& host = "127.0.0.1", int port = 0)
      : store_(std::move(store)), metric_(std::move(metric)) {
    listen_ = Socket(::socket(AF_INET, SOCK_STREAM, 0));
    if (!listen_.valid()) throw Error(ErrorKind::BindError, std::strerror(errno));
    int one = 1;
    ::setsockopt(listen_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      throw Error(ErrorKind::BindError, "bad address " + host);
    }
    if (::bind(listen_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(listen_.fd(), 4) != 0) {
      throw Error(ErrorKind::BindError, host + ":" + std::to_string(port) + ": " + std::strerror(errno));
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    thread_ = std::jthread([this](std::stop_token stop) { serve(stop); });
  }

  ~MeterListener() {
    thread_.request_stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }
  std::uint64_t accepted() const { return accepted_.load(); }
  std::uint64_t rejected() const { return rejected_.load(); }

 private:
  void serve(std::stop_token stop) {
    Socket client;
    std::string buffer;
    while (!stop.stop_requested()) {
      pollfd pfd{client.valid() ? client.fd() : listen_.fd(), POLLIN, 0};
      if (::poll(&pfd, 1, 50) <= 0) continue;
      if (!client.valid()) {
        client = Socket(::accept(listen_.fd(), nullptr, nullptr));
        buffer.clear();
        continue;
      }
      char chunk[4096];
      ssize_t n = ::recv(client.fd(), chunk, sizeof(chunk), 0);
      if (n <= 0) {
        client.reset();
        continue;
      }
      buffer.append(chunk, static_cast<std::size_t>(n));
      std::size_t nl;
      while ((nl = buffer.find('\n')) != std::string::npos) {
        handle(std::string_view(buffer).substr(0, nl));
        buffer.erase(0, nl + 1);
      }
    }
  }

  void handle(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) return;
    try {
      auto r = parse_record(line);
      store_->append(metric_, {}, timeseries::MetricKind::gauge, {r.ts_ms, r.power_w});
      accepted_.fetch_add(1);
    } catch (const Error&) {
      rejected_.fetch_add(1);
    }
  }

  std::shared_ptr<timeseries::MetricStore> store_;
  std::string metric_;
  Socket listen_;
  int port_ = 0;
  std::atomic<std::uint64_t> accepted_{0};
  std::atomic<std::uint64_t> rejected_{0};
  std::jthread thread_;
};

/// Client side: connects once and writes one line per record.
class MeterPublisher {
 public:
  MeterPublisher(const std::string& host, int port) {
    sock_ = Socket(::socket(AF_INET, SOCK_STREAM, 0));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (!sock_.valid() || ::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1 ||
        ::connect(sock_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      throw Error(ErrorKind::IoError, "cannot connect to meter listener " + host + ":" +
                                          std::to_string(port));
    }
  }

  void publish(const MeterRecord& record) { send_raw(format_record(record)); }

  void send_raw(std::string_view bytes) {
    while (!bytes.empty()) {
      ssize_t n = ::send(sock_.fd(), bytes.data(), bytes.size(), MSG_NOSIGNAL);
      if (n <= 0) throw Error(ErrorKind::IoError, "meter link closed");
      bytes.remove_prefix(static_cast<std::size_t>(n));
    }
  }

 private:
  Socket sock_;
};

}  // namespace gridcalib::meter_link
