#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "discom/composition/composition.hpp"
#include "discom/wire/json.hpp"

namespace discom::agent {

/// Carries one request to the platform. Network failures surface as
/// Error(Transport); HTTP error statuses are returned, not thrown.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual wire::HttpResponse send(const wire::HttpRequest& request) = 0;
};

/// Plain HTTP to a platform at e.g. "http://127.0.0.1:8080".
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(std::string base_url, int timeout_seconds = 10);
  wire::HttpResponse send(const wire::HttpRequest& request) override;

 private:
  std::string base_url_;
  int timeout_seconds_;
};

/// In-process transport calling a dispatch function directly, with a
/// switch that simulates losing the network. Keeps a request log.
class LoopbackTransport : public Transport {
 public:
  using Handler = std::function<wire::HttpResponse(const wire::HttpRequest&)>;
  explicit LoopbackTransport(Handler handler) : handler_(std::move(handler)) {}

  wire::HttpResponse send(const wire::HttpRequest& request) override;

  void set_online(bool online) noexcept { online_ = online; }
  bool online() const noexcept { return online_; }

  /// "METHOD path" of every request that reached the handler.
  std::vector<std::string> log() const;
  void clear_log();

 private:
  Handler handler_;
  std::atomic<bool> online_{true};
  mutable std::mutex log_mu_;
  std::vector<std::string> log_;
};

/// Typed calls against the /api/v1 surface. Every method is one request.
class PlatformClient {
 public:
  explicit PlatformClient(std::shared_ptr<Transport> transport, std::string token = {});

  std::string login(const std::string& user, const std::string& secret);
  const std::string& token() const noexcept { return token_; }
  void set_token(std::string token) { token_ = std::move(token); }

  /// Raw call; throws the Error a non-2xx response describes.
  wire::Json call(const std::string& method, const std::string& path, const wire::Json& body = nullptr);

  std::string whoami();
  void add_user(const std::string& id, const std::string& name, const std::string& secret, bool admin);
  std::vector<composition::User> list_users();
  void remove_user(const std::string& id);

  composition::Space create_space(const std::string& name);
  composition::Space add_member(const std::string& space, const std::string& user, composition::MemberRole role);
  composition::Space remove_member(const std::string& space, const std::string& user);
  std::vector<composition::Space> list_spaces();

  composition::ExportDescriptor register_export(const std::string& space, const std::string& name,
                                                const std::string& description, const model::RangeRef& range,
                                                const composition::Visibility& visibility);
  std::vector<composition::ExportDescriptor> catalog();
  void revoke_export(const std::string& id);
  std::int64_t push(const std::string& export_id, const model::RangeImage& image, std::int64_t base_version);
  model::RangeImage latest_image(const std::string& export_id);

  composition::ImportBinding bind_import(const std::string& export_id, const model::RangeRef& target);
  std::vector<composition::ImportBinding> list_imports();
  void delete_import(const std::string& id);
  composition::PollResult poll(const std::vector<std::pair<std::string, std::int64_t>>& known);

  void upload(const std::string& workbook_id, const std::string& document, const std::vector<std::string>& exports,
              const std::vector<std::string>& imports);

 private:
  std::shared_ptr<Transport> transport_;
  std::string token_;
};

/// Percent-encodes one path segment.
std::string encode_segment(std::string_view s);

}  // namespace discom::agent
