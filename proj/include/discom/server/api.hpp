#pragma once

#include "discom/server/platform.hpp"
#include "discom/wire/json.hpp"

namespace discom::server {

/// Maps the /api/v1 HTTP surface onto a Platform. Pure request -> response:
/// the socket server and the in-process loopback transport both call it.
class ApiService {
 public:
  explicit ApiService(Platform& platform) : platform_(platform) {}

  wire::HttpResponse dispatch(const wire::HttpRequest& request);

  Platform& platform() noexcept { return platform_; }

 private:
  wire::Json route(const wire::HttpRequest& request, const std::vector<std::string>& parts);

  Platform& platform_;
};

}  // namespace discom::server
