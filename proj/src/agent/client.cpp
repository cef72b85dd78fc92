#include "discom/agent/client.hpp"

#include <httplib.h>

#include "discom/error.hpp"

namespace discom::agent {

using wire::HttpRequest;
using wire::HttpResponse;
using wire::Json;

std::string encode_segment(std::string_view s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 15]);
    }
  }
  return out;
}

HttpTransport::HttpTransport(std::string base_url, int timeout_seconds)
    : base_url_(std::move(base_url)), timeout_seconds_(timeout_seconds) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

HttpResponse HttpTransport::send(const HttpRequest& request) {
  httplib::Client cli(base_url_);
  cli.set_connection_timeout(timeout_seconds_, 0);
  cli.set_read_timeout(timeout_seconds_, 0);
  cli.set_write_timeout(timeout_seconds_, 0);
  httplib::Headers headers;
  if (!request.bearer.empty()) headers.emplace("Authorization", "Bearer " + request.bearer);
  const auto& m = request.method;
  const char* type = "application/json";
  httplib::Result res;
  if (m == "GET") res = cli.Get(request.path, headers);
  else if (m == "POST") res = cli.Post(request.path, headers, request.body, type);
  else if (m == "PUT") res = cli.Put(request.path, headers, request.body, type);
  else if (m == "PATCH") res = cli.Patch(request.path, headers, request.body, type);
  else if (m == "DELETE") res = cli.Delete(request.path, headers, request.body, type);
  else throw Error(ErrorKind::Transport, "unsupported method " + m);
  if (!res) throw Error(ErrorKind::Transport, base_url_ + ": " + httplib::to_string(res.error()));
  return HttpResponse{res->status, res->body};
}

HttpResponse LoopbackTransport::send(const HttpRequest& request) {
  if (!online_) throw Error(ErrorKind::Transport, "platform unreachable (offline)");
  {
    std::lock_guard lk(log_mu_);
    log_.push_back(request.method + " " + request.path);
  }
  return handler_(request);
}

std::vector<std::string> LoopbackTransport::log() const {
  std::lock_guard lk(log_mu_);
  return log_;
}

void LoopbackTransport::clear_log() {
  std::lock_guard lk(log_mu_);
  log_.clear();
}

PlatformClient::PlatformClient(std::shared_ptr<Transport> transport, std::string token)
    : transport_(std::move(transport)), token_(std::move(token)) {}

Json PlatformClient::call(const std::string& method, const std::string& path, const Json& body) {
  HttpRequest req{method, "/api/v1" + path, body.is_null() ? std::string() : body.dump(), token_};
  auto res = transport_->send(req);
  if (res.status < 200 || res.status >= 300) throw wire::error_from_response(res);
  auto j = Json::parse(res.body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::Transport, "platform sent a malformed response to " + path);
  return j;
}

std::string PlatformClient::login(const std::string& user, const std::string& secret) {
  auto j = call("POST", "/login", {{"user", user}, {"secret", secret}});
  token_ = wire::string_field(j, "token");
  return token_;
}

std::string PlatformClient::whoami() { return wire::string_field(call("GET", "/whoami"), "user"); }

void PlatformClient::add_user(const std::string& id, const std::string& name, const std::string& secret,
                              bool admin) {
  call("POST", "/users", {{"id", id}, {"name", name}, {"secret", secret}, {"admin", admin}});
}

std::vector<composition::User> PlatformClient::list_users() {
  std::vector<composition::User> out;
  for (const auto& u : call("GET", "/users"))
    out.push_back(composition::User{wire::string_field(u, "id"), wire::string_field(u, "name"), {},
                                    u.value("admin", false)});
  return out;
}

void PlatformClient::remove_user(const std::string& id) { call("DELETE", "/users/" + encode_segment(id)); }

composition::Space PlatformClient::create_space(const std::string& name) {
  return wire::space_from_json(call("POST", "/spaces", {{"name", name}}));
}

composition::Space PlatformClient::add_member(const std::string& space, const std::string& user,
                                              composition::MemberRole role) {
  return wire::space_from_json(call("POST", "/spaces/" + encode_segment(space) + "/members",
                                    {{"user", user}, {"role", std::string(composition::to_string(role))}}));
}

composition::Space PlatformClient::remove_member(const std::string& space, const std::string& user) {
  return wire::space_from_json(
      call("DELETE", "/spaces/" + encode_segment(space) + "/members/" + encode_segment(user)));
}

std::vector<composition::Space> PlatformClient::list_spaces() {
  std::vector<composition::Space> out;
  for (const auto& s : call("GET", "/spaces")) out.push_back(wire::space_from_json(s));
  return out;
}

composition::ExportDescriptor PlatformClient::register_export(const std::string& space, const std::string& name,
                                                              const std::string& description,
                                                              const model::RangeRef& range,
                                                              const composition::Visibility& visibility) {
  return wire::export_from_json(call("POST", "/exports",
                                     {{"space", space},
                                      {"name", name},
                                      {"description", description},
                                      {"range", range.to_string()},
                                      {"visibility", wire::to_json(visibility)}}));
}

std::vector<composition::ExportDescriptor> PlatformClient::catalog() {
  std::vector<composition::ExportDescriptor> out;
  for (const auto& e : call("GET", "/exports")) out.push_back(wire::export_from_json(e));
  return out;
}

void PlatformClient::revoke_export(const std::string& id) { call("DELETE", "/exports/" + encode_segment(id)); }

std::int64_t PlatformClient::push(const std::string& export_id, const model::RangeImage& image,
                                  std::int64_t base_version) {
  auto j = call("PUT", "/exports/" + encode_segment(export_id) + "/contribution",
                {{"base_version", base_version}, {"image", model::encode_range_image(image)}});
  return wire::int_field(j, "version");
}

model::RangeImage PlatformClient::latest_image(const std::string& export_id) {
  auto j = call("GET", "/exports/" + encode_segment(export_id) + "/image");
  return model::decode_range_image(wire::string_field(j, "image"));
}

composition::ImportBinding PlatformClient::bind_import(const std::string& export_id, const model::RangeRef& target) {
  return wire::import_from_json(call("POST", "/imports", {{"export_id", export_id}, {"target", target.to_string()}}));
}

std::vector<composition::ImportBinding> PlatformClient::list_imports() {
  std::vector<composition::ImportBinding> out;
  for (const auto& b : call("GET", "/imports")) out.push_back(wire::import_from_json(b));
  return out;
}

void PlatformClient::delete_import(const std::string& id) { call("DELETE", "/imports/" + encode_segment(id)); }

composition::PollResult PlatformClient::poll(const std::vector<std::pair<std::string, std::int64_t>>& known) {
  Json bindings = Json::array();
  for (const auto& [id, v] : known) bindings.push_back({{"id", id}, {"known_version", v}});
  auto j = call("POST", "/updates", {{"bindings", bindings}});
  composition::PollResult out;
  for (const auto& d : wire::field(j, "deltas"))
    out.deltas.push_back(composition::UpdateDelta{wire::string_field(d, "binding_id"),
                                                  wire::string_field(d, "export_id"),
                                                  model::decode_range_image(wire::string_field(d, "image")),
                                                  wire::int_field(d, "from_version"), wire::int_field(d, "to_version")});
  for (const auto& r : wire::field(j, "revocations"))
    out.revocations.push_back(composition::Revocation{wire::string_field(r, "binding_id"),
                                                      wire::string_field(r, "export_id"),
                                                      wire::string_field(r, "reason")});
  return out;
}

void PlatformClient::upload(const std::string& workbook_id, const std::string& document,
                            const std::vector<std::string>& exports, const std::vector<std::string>& imports) {
  call("PUT", "/workbooks/" + encode_segment(workbook_id),
       {{"document", document}, {"exports", exports}, {"imports", imports}});
}

}  // namespace discom::agent
