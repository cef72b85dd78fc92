#include "discom/server/api.hpp"

#include "discom/error.hpp"

namespace discom::server {

using wire::HttpRequest;
using wire::HttpResponse;
using wire::Json;

namespace {

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : path.substr(0, path.find('?'))) {
    if (c == '/') {
      if (!cur.empty()) parts.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) parts.push_back(std::move(cur));
  return parts;
}

std::vector<std::string> string_list(const Json& body, const char* key) {
  std::vector<std::string> out;
  if (!body.contains(key)) return out;
  const auto& arr = body[key];
  if (!arr.is_array()) throw Error(ErrorKind::Integrity, std::string("field '") + key + "' must be an array");
  for (const auto& v : arr) {
    if (!v.is_string()) throw Error(ErrorKind::Integrity, std::string("field '") + key + "' must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

Json delta_json(const UpdateDelta& d) {
  return Json{{"binding_id", d.binding_id},
              {"export_id", d.export_id},
              {"from_version", d.from_version},
              {"to_version", d.to_version},
              {"image", model::encode_range_image(d.image)}};
}

struct MethodNotAllowed {};

}  // namespace

HttpResponse ApiService::dispatch(const HttpRequest& request) {
  try {
    auto parts = split_path(request.path);
    if (parts.size() < 2 || parts[0] != "api" || parts[1] != "v1")
      throw Error(ErrorKind::NotFound, "no route " + request.path);
    parts.erase(parts.begin(), parts.begin() + 2);
    return HttpResponse{200, route(request, parts).dump()};
  } catch (const MethodNotAllowed&) {
    return HttpResponse{405, Json{{"error", "method"}, {"message", request.method + " not allowed"}}.dump()};
  } catch (const Error& e) {
    return HttpResponse{wire::http_status(e.kind()), wire::error_body(e).dump()};
  } catch (const std::exception& e) {
    return HttpResponse{500, Json{{"error", "internal"}, {"message", e.what()}}.dump()};
  }
}

Json ApiService::route(const HttpRequest& req, const std::vector<std::string>& p) {
  auto& P = platform_;
  const auto& m = req.method;
  auto is = [&](std::initializer_list<const char*> shape) {
    if (p.size() != shape.size()) return false;
    std::size_t i = 0;
    for (const char* s : shape) {
      if (*s != '*' && p[i] != s) return false;
      ++i;
    }
    return true;
  };
  auto only = [&](const char* method) {
    if (m != method) throw MethodNotAllowed{};
  };

  if (is({"healthz"})) {
    only("GET");
    return Json{{"status", "ok"}};
  }
  if (is({"login"})) {
    only("POST");
    auto body = wire::parse_body(req.body);
    auto user = wire::string_field(body, "user");
    return Json{{"token", P.login(user, wire::string_field(body, "secret"))}, {"user", user}};
  }

  auto caller = P.authenticate(req.bearer);
  auto body = wire::parse_body(req.body);

  if (is({"whoami"})) {
    only("GET");
    return Json{{"user", caller}};
  }
  if (is({"users"})) {
    if (m == "GET") {
      Json out = Json::array();
      for (const auto& u : P.list_users(caller)) out.push_back(wire::to_json(u));
      return out;
    }
    only("POST");
    auto id = wire::string_field(body, "id");
    P.add_user(caller, id, body.value("name", id), wire::string_field(body, "secret"), body.value("admin", false));
    return Json{{"id", id}};
  }
  if (is({"users", "*"})) {
    only("DELETE");
    P.remove_user(caller, p[1]);
    return Json{{"deleted", p[1]}};
  }
  if (is({"spaces"})) {
    if (m == "GET") {
      Json out = Json::array();
      for (const auto& s : P.list_spaces(caller)) out.push_back(wire::to_json(s));
      return out;
    }
    only("POST");
    return wire::to_json(P.create_space(caller, wire::string_field(body, "name")));
  }
  if (is({"spaces", "*"})) {
    only("DELETE");
    P.delete_space(caller, p[1]);
    return Json{{"deleted", p[1]}};
  }
  if (is({"spaces", "*", "members"})) {
    only("POST");
    auto role = composition::member_role_from(wire::string_field(body, "role"));
    return wire::to_json(P.add_member(caller, p[1], wire::string_field(body, "user"), role));
  }
  if (is({"spaces", "*", "members", "*"})) {
    only("DELETE");
    return wire::to_json(P.remove_member(caller, p[1], p[3]));
  }
  if (is({"exports"})) {
    if (m == "GET") {
      Json out = Json::array();
      for (const auto& e : P.catalog(caller)) out.push_back(wire::to_json(e));
      return out;
    }
    only("POST");
    ExportRequest r;
    r.space = wire::string_field(body, "space");
    r.name = wire::string_field(body, "name");
    r.description = body.value("description", std::string());
    r.range = model::parse_range(wire::string_field(body, "range"));
    if (body.contains("visibility")) r.visibility = wire::visibility_from_json(body["visibility"]);
    return wire::to_json(P.register_export(caller, r));
  }
  if (is({"exports", "*"})) {
    if (m == "DELETE") {
      P.revoke_export(caller, p[1]);
      return Json{{"revoked", p[1]}};
    }
    only("PATCH");
    ExportPatch patch;
    if (body.contains("name")) patch.name = wire::string_field(body, "name");
    if (body.contains("description")) patch.description = wire::string_field(body, "description");
    if (body.contains("visibility")) patch.visibility = wire::visibility_from_json(body["visibility"]);
    return wire::to_json(P.update_export(caller, p[1], patch));
  }
  if (is({"exports", "*", "contribution"})) {
    only("PUT");
    auto image = model::decode_range_image(wire::string_field(body, "image"));
    auto version = P.push_contribution(caller, p[1], image, wire::int_field(body, "base_version"));
    return Json{{"version", version}};
  }
  if (is({"exports", "*", "image"})) {
    only("GET");
    auto image = P.latest_image(caller, p[1]);
    return Json{{"version", image.version}, {"image", model::encode_range_image(image)}};
  }
  if (is({"imports"})) {
    if (m == "GET") {
      Json out = Json::array();
      for (const auto& b : P.list_imports(caller)) out.push_back(wire::to_json(b));
      return out;
    }
    only("POST");
    auto target = model::parse_range(wire::string_field(body, "target"));
    return wire::to_json(P.bind_import(caller, wire::string_field(body, "export_id"), target));
  }
  if (is({"imports", "*"})) {
    only("DELETE");
    P.delete_import(caller, p[1]);
    return Json{{"deleted", p[1]}};
  }
  if (is({"updates"})) {
    only("POST");
    std::vector<std::pair<std::string, std::int64_t>> known;
    const auto& bindings = wire::field(body, "bindings");
    if (!bindings.is_array()) throw Error(ErrorKind::Integrity, "field 'bindings' must be an array");
    for (const auto& b : bindings) known.emplace_back(wire::string_field(b, "id"), wire::int_field(b, "known_version"));
    auto result = P.poll_updates(caller, known);
    Json deltas = Json::array();
    for (const auto& d : result.deltas) deltas.push_back(delta_json(d));
    Json revocations = Json::array();
    for (const auto& r : result.revocations)
      revocations.push_back({{"binding_id", r.binding_id}, {"export_id", r.export_id}, {"reason", r.reason}});
    return Json{{"deltas", deltas}, {"revocations", revocations}};
  }
  if (is({"workbooks", "*"})) {
    if (m == "DELETE") {
      P.delete_workbook(caller, p[1]);
      return Json{{"deleted", p[1]}};
    }
    only("PUT");
    auto document = wire::string_field(body, "document");
    if (auto id = model::decode_workbook(document).id(); id != p[1])
      throw Error(ErrorKind::Integrity, "document id " + id + " does not match path " + p[1]);
    auto id = P.upload_intermediate(caller, document, string_list(body, "exports"), string_list(body, "imports"));
    return Json{{"id", id}};
  }
  if (is({"diagnostics"})) {
    only("GET");
    return Json{{"diagnostics", P.diagnostics()}};
  }
  throw Error(ErrorKind::NotFound, "no route " + req.path);
}

}  // namespace discom::server
