#include "discom/wire/json.hpp"

namespace discom::wire {

using composition::ExportDescriptor;
using composition::ImportBinding;
using composition::Space;
using composition::Visibility;

int http_status(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Authentication: return 401;
    case ErrorKind::Authorization: return 403;
    case ErrorKind::NotFound: return 404;
    case ErrorKind::Conflict: return 409;
    case ErrorKind::Integrity:
    case ErrorKind::Precondition: return 422;
    case ErrorKind::Parse: return 400;
    case ErrorKind::Transport: return 502;
  }
  return 500;
}

ErrorKind error_kind_from_status(int status) noexcept {
  switch (status) {
    case 400: return ErrorKind::Parse;
    case 401: return ErrorKind::Authentication;
    case 403: return ErrorKind::Authorization;
    case 404: return ErrorKind::NotFound;
    case 409: return ErrorKind::Conflict;
    case 422: return ErrorKind::Precondition;
    default: return ErrorKind::Transport;
  }
}

Json error_body(const Error& e) {
  Json j{{"error", std::string(to_string(e.kind()))}, {"message", e.what()}};
  if (e.latest_version) j["latest_version"] = *e.latest_version;
  return j;
}

Error error_from_response(const HttpResponse& r) {
  auto kind = error_kind_from_status(r.status);
  std::string message = "HTTP " + std::to_string(r.status);
  std::optional<std::int64_t> latest;
  auto j = Json::parse(r.body, nullptr, false);
  if (j.is_object()) {
    if (j.contains("message") && j["message"].is_string()) message = j["message"].get<std::string>();
    if (j.contains("error") && j["error"] == "integrity") kind = ErrorKind::Integrity;
    if (j.contains("latest_version") && j["latest_version"].is_number_integer())
      latest = j["latest_version"].get<std::int64_t>();
  }
  Error e(kind, message);
  e.latest_version = latest;
  return e;
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw Error(ErrorKind::Integrity, std::string("missing field '") + key + "'");
  return j[key];
}

std::string string_field(const Json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_string()) throw Error(ErrorKind::Integrity, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::int64_t int_field(const Json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number_integer()) throw Error(ErrorKind::Integrity, std::string("field '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

Json parse_body(const std::string& body) {
  auto j = Json::parse(body.empty() ? std::string("{}") : body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::Parse, "request body is not valid JSON");
  return j;
}

Json to_json(const Visibility& v) {
  if (v.kind == Visibility::Kind::SpaceWide) return Json{{"kind", "space"}};
  return Json{{"kind", "restricted"}, {"users", v.users}};
}

Visibility visibility_from_json(const Json& j) {
  auto kind = string_field(j, "kind");
  if (kind == "space") return Visibility::space_wide();
  if (kind != "restricted") throw Error(ErrorKind::Integrity, "unknown visibility kind '" + kind + "'");
  std::set<std::string> users;
  for (const auto& u : field(j, "users")) {
    if (!u.is_string()) throw Error(ErrorKind::Integrity, "restricted users must be strings");
    users.insert(u.get<std::string>());
  }
  return Visibility::restricted(std::move(users));
}

Json to_json(const Space& s) {
  Json members = Json::object();
  for (const auto& [u, role] : s.members) members[u] = std::string(composition::to_string(role));
  return Json{{"id", s.id}, {"name", s.name}, {"creator", s.creator}, {"members", members}};
}

Space space_from_json(const Json& j) {
  Space s{string_field(j, "id"), string_field(j, "name"), string_field(j, "creator"), {}};
  for (const auto& [u, role] : field(j, "members").items())
    s.members[u] = composition::member_role_from(role.get<std::string>());
  return s;
}

Json to_json(const ExportDescriptor& e) {
  return Json{{"id", e.id},
              {"owner", e.owner},
              {"space", e.space},
              {"name", e.name},
              {"description", e.description},
              {"range", e.range.to_string()},
              {"visibility", to_json(e.visibility)},
              {"latest_version", e.latest_version},
              {"revoked", e.revoked}};
}

ExportDescriptor export_from_json(const Json& j) {
  ExportDescriptor e;
  e.id = string_field(j, "id");
  e.owner = string_field(j, "owner");
  e.space = string_field(j, "space");
  e.name = string_field(j, "name");
  e.description = j.value("description", std::string());
  e.range = model::parse_range(string_field(j, "range"));
  e.visibility = visibility_from_json(field(j, "visibility"));
  e.latest_version = j.value("latest_version", std::int64_t{0});
  e.revoked = j.value("revoked", false);
  return e;
}

Json to_json(const ImportBinding& b) {
  return Json{{"id", b.id},
              {"importer", b.importer},
              {"export_id", b.export_id},
              {"target", b.target.to_string()},
              {"applied_version", b.applied_version}};
}

ImportBinding import_from_json(const Json& j) {
  ImportBinding b;
  b.id = string_field(j, "id");
  b.importer = string_field(j, "importer");
  b.export_id = string_field(j, "export_id");
  b.target = model::parse_range(string_field(j, "target"));
  b.applied_version = j.value("applied_version", std::int64_t{0});
  return b;
}

Json to_json(const composition::User& u) { return Json{{"id", u.id}, {"name", u.name}, {"admin", u.admin}}; }

}  // namespace discom::wire
