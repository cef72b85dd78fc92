#include <random>

#include "discom/model/range_image.hpp"

#include "criteria.hpp"
#include "../support/harness.hpp"

namespace discom::acceptance {

namespace {

using composition::MemberRole;
using composition::Visibility;
using wire::HttpRequest;
using wire::Json;

model::RangeImage marked(const std::string& export_id, const std::string& marker) {
  return model::RangeImage{export_id, 1, 2, 2, {model::CellValue(marker), model::CellValue(1.0), model::CellValue(2.0), {}}};
}

struct Fixture {
  testing::Harness h;
  std::string area, other;
  std::string restricted, withdrawn, spacewide, managers;  // export ids
  std::string carl_binding, mary_binding;
  std::set<std::string> markers;  // text only restricted readers may ever see
  std::vector<std::string> intruders = {"mary", "paul", "eve", "dave"};

  Fixture() {
    for (const char* u : {"carl", "john", "mary", "paul", "eve", "dave", "zoe"}) h.add_user(u);
    area = h.platform.create_space("carl", "Area North 2010").id;
    for (const char* u : {"john", "mary", "paul"}) h.platform.add_member("carl", area, u, MemberRole::Both);
    other = h.platform.create_space("zoe", "Area South").id;
    h.platform.add_member("zoe", other, "dave", MemberRole::Both);

    auto reg = [&](const std::string& owner, const std::string& range, Visibility v) {
      return h.platform.register_export(owner, {area, "x", "", model::parse_range(range), std::move(v)}).id;
    };
    restricted = reg("john", "S!A1:B2", Visibility::restricted({"carl"}));
    withdrawn = reg("john", "T!A1:B2", Visibility::restricted({"carl", "mary"}));
    spacewide = reg("john", "U!A1:B2", Visibility::space_wide());
    managers = reg("carl", "C!A1:B2", Visibility::space_wide());
    markers = {"SECRET-R-7731", "SECRET-W-5120"};
    h.platform.push_contribution("john", restricted, marked(restricted, "SECRET-R-7731"), 0);
    h.platform.push_contribution("john", withdrawn, marked(withdrawn, "SECRET-W-5120"), 0);
    h.platform.push_contribution("john", spacewide, marked(spacewide, "public"), 0);
    h.platform.push_contribution("carl", managers, marked(managers, "index"), 0);
    carl_binding = h.platform.bind_import("carl", restricted, model::parse_range("In!A1:B2")).id;

    // mary was allowed to read `withdrawn`, then dropped from its set.
    mary_binding = h.platform.bind_import("mary", withdrawn, model::parse_range("In!A1:B2")).id;
    h.platform.poll_updates("mary", {{mary_binding, 0}});
    h.platform.update_export("john", withdrawn, server::ExportPatch{{}, {}, Visibility::restricted({"carl"})});
    h.platform.push_contribution("john", withdrawn, marked(withdrawn, "SECRET-W-5120"), 1);
  }
};

struct Fuzzer {
  Fixture& f;
  std::mt19937_64 rng{55};
  std::map<std::string, std::string> tokens;
  std::map<std::string, std::vector<std::string>> own_bindings;

  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }
  template <class T>
  const T& any(const std::vector<T>& v) { return v[static_cast<std::size_t>(pick(static_cast<int>(v.size())))]; }

  std::string token_for(const std::string& who) {
    if (who == "anonymous") return {};
    if (who == "forged") return std::string(64, 'a');
    auto& t = tokens[who];
    if (t.empty()) t = f.h.platform.login(who, who + "-secret");
    return t;
  }

  HttpRequest request(const std::string& who) {
    static const std::vector<std::string> victims_of_write = {"restricted", "withdrawn", "spacewide", "managers"};
    auto id_of = [&](const std::string& name) {
      if (name == "restricted") return f.restricted;
      if (name == "withdrawn") return f.withdrawn;
      if (name == "spacewide") return f.spacewide;
      if (name == "managers") return f.managers;
      return std::string("export-404");
    };
    auto secret = pick(2) ? f.restricted : f.withdrawn;
    auto victim = id_of(any(victims_of_write));
    auto image = [&](const std::string& id) {
      return model::encode_range_image(model::RangeImage{id, 1, 2, 2, {1.0, 2.0, 3.0, 4.0}});
    };
    std::vector<std::string> bindings = {f.carl_binding, f.mary_binding, "import-404"};
    for (const auto& b : own_bindings[who]) bindings.push_back(b);
    const std::string api = "/api/v1";
    switch (pick(12)) {
      case 0: return {"GET", api + "/exports/" + secret + "/image", "", token_for(who)};
      case 1:
        return {"PUT", api + "/exports/" + victim + "/contribution",
                Json{{"base_version", pick(4)}, {"image", image(victim)}}.dump(), token_for(who)};
      case 2:
        return {"PATCH", api + "/exports/" + victim,
                Json{{"visibility", Json{{"kind", "restricted"}, {"users", {who}}}}, {"name", "mine"}}.dump(),
                token_for(who)};
      case 3: return {"DELETE", api + "/exports/" + victim, "", token_for(who)};
      case 4:
        return {"POST", api + "/imports", Json{{"export_id", secret}, {"target", "Z!A1:B2"}}.dump(), token_for(who)};
      case 5: {
        Json list = Json::array();
        for (int i = pick(3) + 1; i > 0; --i) list.push_back({{"id", any(bindings)}, {"known_version", pick(3)}});
        return {"POST", api + "/updates", Json{{"bindings", list}}.dump(), token_for(who)};
      }
      case 6: return {"DELETE", api + "/imports/" + f.carl_binding, "", token_for(who)};
      case 7: return {"GET", api + "/exports", "", token_for(who)};
      case 8: {
        model::Workbook wb("carl-asm");
        wb.add_sheet("S");
        return {"PUT", api + "/workbooks/carl-asm",
                Json{{"document", model::encode_workbook(wb)}, {"exports", {f.managers}}, {"imports", Json::array()}}.dump(),
                token_for(who)};
      }
      case 9:
        return {"POST", api + "/spaces/" + f.area + "/members", Json{{"user", who}, {"role", "both"}}.dump(),
                token_for(who)};
      case 10: return {"GET", api + "/imports", "", token_for(who)};
      default:
        // Binding something legitimately visible, to poll it later.
        return {"POST", api + "/imports", Json{{"export_id", f.spacewide}, {"target", "P!A1:B2"}}.dump(), token_for(who)};
    }
  }
};

}  // namespace

Verdict authorization_fuzz() {
  auto t0 = std::chrono::steady_clock::now();
  Fixture f;
  auto before = f.h.platform.snapshot();
  Fuzzer fuzz{f};
  std::vector<std::string> principals = f.intruders;
  principals.push_back("anonymous");
  principals.push_back("forged");

  int leaks = 0, writes = 0, denied = 0;
  std::string first_problem;
  for (int i = 0; i < 10000; ++i) {
    const auto& who = fuzz.any(principals);
    auto req = fuzz.request(who);
    auto res = f.h.api.dispatch(req);
    bool ok = res.status >= 200 && res.status < 300;
    if (!ok) ++denied;
    for (const auto& m : f.markers)
      if (res.body.find(m) != std::string::npos) {
        if (first_problem.empty()) first_problem = who + " read a restricted image via " + req.method + " " + req.path;
        ++leaks;
      }
    bool write = req.method != "GET" && req.path != "/api/v1/updates";
    bool own_import = req.method == "POST" && req.path == "/api/v1/imports" &&
                      req.body.find(f.spacewide) != std::string::npos;
    if (ok && write && !own_import) {
      if (first_problem.empty()) first_problem = who + " succeeded with " + req.method + " " + req.path;
      ++writes;
    }
    if (ok && own_import) fuzz.own_bindings[who].push_back(Json::parse(res.body)["id"].get<std::string>());
    if (ok && req.method == "GET" && req.path == "/api/v1/exports")
      for (const auto& d : Json::parse(res.body))
        if (d["id"] == f.restricted || d["id"] == f.withdrawn) {
          if (first_problem.empty()) first_problem = who + " sees a restricted export in the catalog";
          ++leaks;
        }
  }

  // Nothing that existed before may have changed.
  auto after = f.h.platform.snapshot();
  for (const auto& [id, rec] : before.exports) {
    const auto& now = after.exports.at(id);
    if (now.versions.size() != rec.versions.size() || now.descriptor.revoked != rec.descriptor.revoked ||
        !(now.descriptor.visibility == rec.descriptor.visibility) || now.descriptor.name != rec.descriptor.name) {
      if (first_problem.empty()) first_problem = "export " + id + " was modified";
      ++writes;
    }
  }
  for (const auto& [id, b] : before.imports)
    if (!after.imports.contains(id)) {
      if (first_problem.empty()) first_problem = "binding " + id + " was deleted";
      ++writes;
    }
  if (after.directory.spaces.at(f.area).members != before.directory.spaces.at(f.area).members) {
    if (first_problem.empty()) first_problem = "membership of " + f.area + " changed";
    ++writes;
  }
  if (!after.workbooks.empty()) {
    first_problem = first_problem.empty() ? "a workbook was stored" : first_problem;
    ++writes;
  }

  if (leaks || writes)
    return {false, std::to_string(leaks) + " restricted reads, " + std::to_string(writes) +
                       " foreign writes; first: " + first_problem};
  return {true, "10000 requests (" + std::to_string(denied) + " refused): 0 restricted reads, 0 foreign writes, " +
                    fmt_seconds(seconds_since(t0))};
}

}  // namespace discom::acceptance
