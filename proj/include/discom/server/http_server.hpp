#pragma once

#include <memory>
#include <string>
#include <thread>

#include "discom/server/api.hpp"

namespace httplib {
class Server;
}

namespace discom::server {

/// Serves an ApiService over HTTP on a background thread.
class HttpServer {
 public:
  explicit HttpServer(ApiService& api);
  ~HttpServer();

  /// Binds and starts serving. Port 0 picks a free port. Throws
  /// Error(Transport) when the address cannot be bound.
  int start(const std::string& host, int port);
  void stop();
  int port() const noexcept { return port_; }

 private:
  ApiService& api_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace discom::server
