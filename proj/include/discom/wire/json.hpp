#pragma once

#include <json.hpp>
#include <string>

#include "discom/composition/composition.hpp"
#include "discom/error.hpp"
#include "discom/model/range_image.hpp"

// JSON envelopes shared by the platform API, the store and the agent. Range
// images and workbooks travel as their canonical XML inside JSON strings.
namespace discom::wire {

using Json = nlohmann::json;

struct HttpRequest {
  std::string method;
  std::string path;
  std::string body;
  std::string bearer;  // token without the "Bearer " prefix
};

struct HttpResponse {
  int status = 200;
  std::string body;
};

int http_status(ErrorKind kind) noexcept;
ErrorKind error_kind_from_status(int status) noexcept;

/// {"error": kind, "message": text[, "latest_version": n]}
Json error_body(const Error& e);
/// Rebuilds the Error a non-2xx response carries.
Error error_from_response(const HttpResponse& r);

Json to_json(const composition::Visibility& v);
composition::Visibility visibility_from_json(const Json& j);

Json to_json(const composition::Space& s);
composition::Space space_from_json(const Json& j);

Json to_json(const composition::ExportDescriptor& e);
composition::ExportDescriptor export_from_json(const Json& j);

Json to_json(const composition::ImportBinding& b);
composition::ImportBinding import_from_json(const Json& j);

/// Public view of a user: no credential.
Json to_json(const composition::User& u);

/// Field access that turns missing/mistyped fields into Error(Integrity).
const Json& field(const Json& j, const char* key);
std::string string_field(const Json& j, const char* key);
std::int64_t int_field(const Json& j, const char* key);
Json parse_body(const std::string& body);

}  // namespace discom::wire
