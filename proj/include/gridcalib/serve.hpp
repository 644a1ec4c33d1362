#pragma once

// Read-only HTTP view of a metric store:
//
//   GET /metrics           text exposition, one line per series:
//                          NAME{K="V",...} VALUE TIMESTAMP_MS
//   GET /query?expr=...    {"value_w": <float>}, 400 on a malformed expression

#include <memory>
#include <string>
#include <thread>

#include <httplib.h>

#include "gridcalib/csv.hpp"
#include "gridcalib/error.hpp"
#include "gridcalib/query.hpp"
#include "gridcalib/timeseries.hpp"

namespace gridcalib::serve {

inline std::string escape_label_value(const std::string& v) {
  std::string out;
  for (char c : v) {
    if (c == '\\' || c == '"') {
      out += '\\';
      out += c;
    } else if (c == '\n') {
      out += "\\n";
    } else {
      out += c;
    }
  }
  return out;
}

inline std::string exposition_line(const timeseries::Series& s) {
  std::string line = s.name();
  if (!s.labels().empty()) {
    line += '{';
    bool first = true;
    for (const auto& [k, v] : s.labels()) {
      if (!first) line += ',';
      first = false;
      line += k + "=\"" + escape_label_value(v) + '"';
    }
    line += '}';
  }
  const auto& last = s.back();
  line += ' ' + format_double(last.value) + ' ' + std::to_string(last.timestamp) + '\n';
  return line;
}

/// Latest sample of every non-empty series, in (name, labels) order.
inline std::string exposition(const timeseries::MetricStore& store) {
  std::string out;
  for (const auto& s : store.snapshot()) {
    if (!s.empty()) out += exposition_line(s);
  }
  return out;
}

inline std::string query_body(Watts value) {
  return "{\"value_w\": " + format_double(value) + "}";
}

/// Serves the endpoints on a background thread until destroyed or stopped.
class MetricsServer {
 public:
  /// port 0 binds any free port.
  MetricsServer(std::shared_ptr<const timeseries::MetricStore> store, const std::string& host,
                int port)
      : store_(std::move(store)) {
    // The library default is SO_REUSEPORT, which lets a second server share a
    // busy port silently.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    server_.Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(exposition(*store_), "text/plain; version=0.0.4");
    });
    server_.Get("/query", [this](const httplib::Request& req, httplib::Response& res) {
      if (!req.has_param("expr")) {
        res.status = 400;
        res.set_content("ParseError: missing expr parameter", "text/plain");
        return;
      }
      try {
        Watts v = timeseries::query(*store_, req.get_param_value("expr"));
        res.set_content(query_body(v), "application/json");
      } catch (const Error& e) {
        res.status = e.kind() == ErrorKind::ParseError ? 400 : 500;
        res.set_content(e.what(), "text/plain");
      }
    });
    if (port == 0) {
      port_ = server_.bind_to_any_port(host);
      if (port_ < 0) throw Error(ErrorKind::BindError, "cannot bind " + host);
    } else {
      if (!server_.bind_to_port(host, port)) {
        throw Error(ErrorKind::BindError, "cannot bind " + host + ":" + std::to_string(port));
      }
      port_ = port;
    }
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MetricsServer() { stop(); }

  MetricsServer(const MetricsServer&) = delete;
  MetricsServer& operator=(const MetricsServer&) = delete;

  int port() const { return port_; }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  std::shared_ptr<const timeseries::MetricStore> store_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

/// Splits "host:port"; a bare port binds 127.0.0.1.
inline std::pair<std::string, int> parse_bind(const std::string& addr) {
  auto colon = addr.rfind(':');
  std::string host = colon == std::string::npos ? "127.0.0.1" : addr.substr(0, colon);
  std::string port_text = colon == std::string::npos ? addr : addr.substr(colon + 1);
  if (host.empty()) host = "0.0.0.0";
  std::int64_t port = 0;
  try {
    port = parse_int(port_text);
  } catch (const Error&) {
    throw Error(ErrorKind::BindError, "bad bind address '" + addr + "'");
  }
  if (port < 0 || port > 65535) throw Error(ErrorKind::BindError, "port out of range in " + addr);
  return {host, static_cast<int>(port)};
}

}  // namespace gridcalib::serve
