#include "discom/server/http_server.hpp"

#include <httplib.h>

#include "discom/error.hpp"

namespace discom::server {

HttpServer::HttpServer(ApiService& api) : api_(api), server_(std::make_unique<httplib::Server>()) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    wire::HttpRequest r{req.method, req.path, req.body, {}};
    auto auth = req.get_header_value("Authorization");
    if (auth.rfind("Bearer ", 0) == 0) r.bearer = auth.substr(7);
    auto out = api_.dispatch(r);
    res.status = out.status;
    res.set_content(out.body, "application/json");
  };
  const char* pattern = R"(/.*)";
  server_->Get(pattern, handler);
  server_->Post(pattern, handler);
  server_->Put(pattern, handler);
  server_->Patch(pattern, handler);
  server_->Delete(pattern, handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ < 0) throw Error(ErrorKind::Transport, "cannot listen on " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void HttpServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace discom::server
