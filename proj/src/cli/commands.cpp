#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "discom/agent/runner.hpp"
#include "discom/cli/cli.hpp"
#include "discom/cli/scenario.hpp"
#include "discom/model/address.hpp"
#include "discom/model/range_image.hpp"
#include "discom/server/api.hpp"
#include "discom/server/http_server.hpp"
#include "discom/server/platform.hpp"

namespace discom::cli {

using wire::Json;
namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) noexcept { return kind == ErrorKind::Transport ? kServerError : kUserError; }

namespace {

constexpr const char* kDefaultServer = "http://127.0.0.1:8080";

std::atomic<bool> g_signalled{false};

extern "C" void on_signal(int) { g_signalled = true; }

struct Globals {
  std::string server;
  std::string token;
  std::string config;
  bool json = false;
};

CommandOutcome done(std::string text, Json json = nullptr) { return CommandOutcome{kOk, std::move(text), std::move(json)}; }

CommandOutcome failed(int code, const std::string& message, const std::string& kind) {
  return CommandOutcome{code, "error: " + message, Json{{"error", kind}, {"message", message}}};
}

std::string describe(const composition::Visibility& v) {
  if (v.kind == composition::Visibility::Kind::SpaceWide) return "space";
  std::string out = "restricted:";
  for (const auto& u : v.users) out += (out.back() == ':' ? "" : ",") + u;
  return out;
}

std::string describe(const composition::Space& s) {
  std::string members;
  for (const auto& [u, role] : s.members) members += (members.empty() ? "" : ", ") + u + "(" + std::string(to_string(role)) + ")";
  return s.id + "  " + s.name + "  creator " + s.creator + "  members " + members;
}

std::string describe(const composition::ExportDescriptor& d) {
  return d.id + "  " + d.name + "  " + d.range.to_string() + "  owner " + d.owner + "  " + d.space + "  " +
         describe(d.visibility) + "  v" + std::to_string(d.latest_version) + (d.revoked ? "  revoked" : "");
}

std::string describe(const composition::ImportBinding& b) {
  return b.id + "  " + b.export_id + " -> " + b.target.to_string() + "  applied v" + std::to_string(b.applied_version);
}

model::Workbook load_or_create_workbook(const std::string& path, const std::string& id) {
  if (fs::exists(path)) return model::decode_workbook(agent::load_text_file(path));
  return model::Workbook(id.empty() ? fs::path(path).stem().string() : id);
}

model::Workbook load_workbook(const std::string& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::NotFound, "no workbook at " + path);
  return model::decode_workbook(agent::load_text_file(path));
}

void save_workbook(const std::string& path, const model::Workbook& wb) {
  agent::save_text_file(path, model::encode_workbook(wb));
}

/// Setting lookup for `serve`: flag, then environment, then settings file.
class Settings {
 public:
  Settings(const CliContext& ctx, const std::string& file) : ctx_(ctx) {
    if (file.empty()) return;
    std::ifstream in(file);
    if (!in) throw Error(ErrorKind::NotFound, "cannot read settings file " + file);
    file_ = Json::parse(in, nullptr, false);
    if (!file_.is_object()) throw Error(ErrorKind::Parse, "settings file " + file + " is not a JSON object");
  }

  std::string get(const CLI::Option* flag, const std::string& flag_value, const std::string& env, const char* key,
                  const std::string& fallback) const {
    if (flag->count() > 0) return flag_value;
    if (auto v = ctx_.env(env)) return *v;
    if (file_.contains(key)) {
      const auto& j = file_[key];
      return j.is_string() ? j.get<std::string>() : j.dump();
    }
    return fallback;
  }

 private:
  const CliContext& ctx_;
  Json file_ = Json::object();
};

std::int64_t parse_count(const std::string& text, const char* what) {
  std::size_t used = 0;
  std::int64_t v = -1;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || v < 0) throw Error(ErrorKind::Parse, std::string(what) + " must be a non-negative integer");
  return v;
}

void sleep_unless_stopped(const CliContext& ctx, std::chrono::milliseconds total) {
  auto until = std::chrono::steady_clock::now() + total;
  while (!ctx.should_stop() && std::chrono::steady_clock::now() < until)
    std::this_thread::sleep_for(std::min<std::chrono::milliseconds>(std::chrono::milliseconds(50), total));
}

}  // namespace

std::string default_config_path(const CliContext& ctx) {
  if (auto p = ctx.env("DISCOM_CONFIG")) return *p;
  auto home = ctx.env("HOME");
  return (fs::path(home ? *home : ".") / ".config" / "discom" / "agent.json").string();
}

AgentConfig load_agent_config(const std::string& path) {
  AgentConfig c;
  std::ifstream in(path);
  if (!in) return c;
  auto j = Json::parse(in, nullptr, false);
  if (!j.is_object()) throw Error(ErrorKind::Parse, "agent config " + path + " is not a JSON object");
  c.server = j.value("server", std::string());
  c.user = j.value("user", std::string());
  c.token = j.value("token", std::string());
  c.poll_interval_ms = j.value("poll_interval_ms", c.poll_interval_ms);
  c.workbook = j.value("workbook", std::string());
  return c;
}

void save_agent_config(const std::string& path, const AgentConfig& c) {
  auto dir = fs::path(path).parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  Json j{{"server", c.server},
         {"user", c.user},
         {"token", c.token},
         {"poll_interval_ms", c.poll_interval_ms},
         {"workbook", c.workbook}};
  agent::save_text_file(path, j.dump(2) + "\n");
}

CommandOutcome run_command(const std::vector<std::string>& args, const CliContext& given) {
  CliContext ctx = given;
  if (!ctx.connect)
    ctx.connect = [](const std::string& url) { return std::make_shared<agent::HttpTransport>(url); };
  if (!ctx.env)
    ctx.env = [](const std::string& name) -> std::optional<std::string> {
      const char* v = std::getenv(name.c_str());
      return v ? std::optional<std::string>(v) : std::nullopt;
    };
  if (!ctx.progress) ctx.progress = &std::cout;
  if (!ctx.should_stop) ctx.should_stop = [] { return g_signalled.load(); };

  Globals g;
  CLI::App app{"Distributed spreadsheet composition: platform, agent and administration", "discom"};
  app.require_subcommand(1);
  app.add_option("--server", g.server, "Platform URL (env DISCOM_SERVER)");
  app.add_option("--token", g.token, "Session token (env DISCOM_TOKEN)");
  app.add_option("--config", g.config, "Agent config file (env DISCOM_CONFIG)");
  app.add_flag("--json", g.json, "Machine-readable output");

  std::function<CommandOutcome()> action;

  // Resolution helpers; flags beat the environment, which beats the config file.
  auto config_path = [&] { return g.config.empty() ? default_config_path(ctx) : g.config; };
  auto config = [&] { return load_agent_config(config_path()); };
  auto server_url = [&] {
    if (!g.server.empty()) return g.server;
    if (auto v = ctx.env("DISCOM_SERVER")) return *v;
    auto c = config();
    return c.server.empty() ? std::string(kDefaultServer) : c.server;
  };
  auto token = [&] {
    if (!g.token.empty()) return g.token;
    if (auto v = ctx.env("DISCOM_TOKEN")) return *v;
    return config().token;
  };
  auto client = [&] {
    auto t = token();
    if (t.empty()) throw Error(ErrorKind::Authentication, "not logged in; run `discom login USER` or pass --token");
    return agent::PlatformClient(ctx.connect(server_url()), t);
  };
  // The caller's only space matching `pick`, for commands run without --space.
  auto infer_space = [&](agent::PlatformClient& c, const std::function<bool(const composition::Space&, const std::string&)>& pick) {
    auto me = c.whoami();
    std::vector<std::string> found;
    for (const auto& s : c.list_spaces())
      if (pick(s, me)) found.push_back(s.id);
    if (found.size() != 1)
      throw Error(ErrorKind::Precondition, found.empty() ? "no suitable space; pass --space"
                                                         : "several suitable spaces; pass --space");
    return found.front();
  };

  // login
  auto* login = app.add_subcommand("login", "Open a session and store it in the agent config");
  std::string login_user, login_secret;
  bool no_save = false;
  login->add_option("user", login_user, "User id")->required();
  login->add_option("--secret", login_secret, "Secret (env DISCOM_SECRET)");
  login->add_flag("--no-save", no_save, "Print the token without storing it");
  login->callback([&] {
    action = [&] {
      auto secret = login_secret;
      if (secret.empty()) secret = ctx.env("DISCOM_SECRET").value_or("");
      if (secret.empty()) throw Error(ErrorKind::Parse, "pass --secret or set DISCOM_SECRET");
      auto url = server_url();
      agent::PlatformClient c(ctx.connect(url));
      auto t = c.login(login_user, secret);
      if (!no_save) {
        auto cfg = config();
        cfg.server = url;
        cfg.user = login_user;
        cfg.token = t;
        save_agent_config(config_path(), cfg);
      }
      return done(t, Json{{"user", login_user}, {"server", url}, {"token", t}});
    };
  });

  auto* whoami = app.add_subcommand("whoami", "Show the user behind the session");
  whoami->callback([&] {
    action = [&] {
      auto me = client().whoami();
      return done(me, Json{{"user", me}});
    };
  });

  // admin user add/list/remove
  auto* admin = app.add_subcommand("admin", "Platform administration")->require_subcommand(1);
  auto* admin_user = admin->add_subcommand("user", "User accounts")->require_subcommand(1);
  std::string user_id, user_name, user_secret;
  bool user_admin = false;
  auto* user_add = admin_user->add_subcommand("add", "Create an account");
  user_add->add_option("id", user_id)->required();
  user_add->add_option("--name", user_name, "Display name (defaults to the id)");
  user_add->add_option("--secret", user_secret, "Initial secret")->required();
  user_add->add_flag("--admin", user_admin, "Grant administration rights");
  user_add->callback([&] {
    action = [&] {
      client().add_user(user_id, user_name.empty() ? user_id : user_name, user_secret, user_admin);
      return done("created user " + user_id, Json{{"id", user_id}});
    };
  });
  auto* user_list = admin_user->add_subcommand("list", "List accounts");
  user_list->callback([&] {
    action = [&] {
      std::string text;
      Json j = Json::array();
      for (const auto& u : client().list_users()) {
        text += u.id + "  " + u.name + (u.admin ? "  admin" : "") + "\n";
        j.push_back(wire::to_json(u));
      }
      return done(text, j);
    };
  });
  auto* user_remove = admin_user->add_subcommand("remove", "Delete an account");
  user_remove->add_option("id", user_id)->required();
  user_remove->callback([&] {
    action = [&] {
      client().remove_user(user_id);
      return done("removed user " + user_id, Json{{"id", user_id}});
    };
  });

  // space create/add-member/remove-member/list
  auto* space = app.add_subcommand("space", "Spaces and membership")->require_subcommand(1);
  std::string space_name, space_id, member, role_name;
  auto* space_create = space->add_subcommand("create", "Create a space you own");
  space_create->add_option("name", space_name)->required();
  space_create->callback([&] {
    action = [&] {
      auto s = client().create_space(space_name);
      return done(s.id, wire::to_json(s));
    };
  });
  auto* space_add = space->add_subcommand("add-member", "Add a member to a space you created");
  space_add->add_option("user", member)->required();
  space_add->add_option("--role", role_name, "creator, exporter, importer or both")->required();
  space_add->add_option("--space", space_id, "Space id (default: the only space you created)");
  space_add->callback([&] {
    action = [&] {
      auto role = composition::member_role_from(role_name);
      auto c = client();
      auto id = space_id.empty() ? infer_space(c, [](const auto& s, const auto& me) { return s.creator == me; }) : space_id;
      auto s = c.add_member(id, member, role);
      return done(member + " is " + role_name + " in " + s.id, wire::to_json(s));
    };
  });
  auto* space_remove = space->add_subcommand("remove-member", "Remove a member from a space you created");
  space_remove->add_option("user", member)->required();
  space_remove->add_option("--space", space_id, "Space id (default: the only space you created)");
  space_remove->callback([&] {
    action = [&] {
      auto c = client();
      auto id = space_id.empty() ? infer_space(c, [](const auto& s, const auto& me) { return s.creator == me; }) : space_id;
      auto s = c.remove_member(id, member);
      return done(member + " removed from " + s.id, wire::to_json(s));
    };
  });
  auto* space_list = space->add_subcommand("list", "Spaces you belong to");
  space_list->callback([&] {
    action = [&] {
      std::string text;
      Json j = Json::array();
      for (const auto& s : client().list_spaces()) {
        text += describe(s) + "\n";
        j.push_back(wire::to_json(s));
      }
      return done(text, j);
    };
  });

  // export register/list/revoke
  auto* exp = app.add_subcommand("export", "Published ranges")->require_subcommand(1);
  std::string range_text, export_name, export_description, workbook_path, export_id;
  std::vector<std::string> to;
  auto* exp_register = exp->add_subcommand("register", "Publish a range of your workbook");
  exp_register->add_option("--range", range_text, "Range, e.g. Sales!A2:D6")->required();
  exp_register->add_option("--space", space_id, "Space id (default: your only exporting space)");
  exp_register->add_option("--name", export_name, "Name (defaults to the range)");
  exp_register->add_option("--description", export_description);
  exp_register->add_option("--to", to, "Restrict visibility to these users (repeatable)");
  exp_register->add_option("--workbook", workbook_path, "Track the export in this workbook file");
  exp_register->callback([&] {
    action = [&] {
      auto range = model::parse_range(range_text);
      auto c = client();
      auto id = space_id.empty() ? infer_space(c,
                                               [](const auto& s, const auto& me) {
                                                 auto* r = s.role_of(me);
                                                 return r && composition::can_export(*r);
                                               })
                                 : space_id;
      auto visibility = to.empty() ? composition::Visibility::space_wide()
                                   : composition::Visibility::restricted({to.begin(), to.end()});
      auto name = export_name.empty() ? range.to_string() : export_name;
      composition::ExportDescriptor d;
      if (workbook_path.empty()) {
        d = c.register_export(id, name, export_description, range, visibility);
      } else {
        agent::Agent a(load_workbook(workbook_path), c);
        d = a.register_export(id, name, export_description, range, visibility);
        save_workbook(workbook_path, a.workbook());
      }
      return done(d.id, wire::to_json(d));
    };
  });
  auto* exp_list = exp->add_subcommand("list", "Exports you can see");
  exp_list->callback([&] {
    action = [&] {
      std::string text;
      Json j = Json::array();
      for (const auto& d : client().catalog()) {
        text += describe(d) + "\n";
        j.push_back(wire::to_json(d));
      }
      return done(text, j);
    };
  });
  auto* exp_revoke = exp->add_subcommand("revoke", "Withdraw an export you own");
  exp_revoke->add_option("id", export_id)->required();
  exp_revoke->callback([&] {
    action = [&] {
      client().revoke_export(export_id);
      return done("revoked " + export_id, Json{{"id", export_id}});
    };
  });

  // import bind/list/remove
  auto* imp = app.add_subcommand("import", "Bindings of remote exports into your workbook")->require_subcommand(1);
  std::string target_text, binding_id;
  auto* imp_bind = imp->add_subcommand("bind", "Bind an export to a target range");
  imp_bind->add_option("export", export_id)->required();
  imp_bind->add_option("--target", target_text, "Target range with the export's dimensions")->required();
  imp_bind->add_option("--workbook", workbook_path, "Track the binding in this workbook file");
  imp_bind->callback([&] {
    action = [&] {
      auto target = model::parse_range(target_text);
      auto c = client();
      composition::ImportBinding b;
      if (workbook_path.empty()) {
        b = c.bind_import(export_id, target);
      } else {
        agent::Agent a(load_workbook(workbook_path), c);
        b = a.bind_import(export_id, target);
        save_workbook(workbook_path, a.workbook());
      }
      return done(b.id, wire::to_json(b));
    };
  });
  auto* imp_list = imp->add_subcommand("list", "Your bindings");
  imp_list->callback([&] {
    action = [&] {
      std::string text;
      Json j = Json::array();
      for (const auto& b : client().list_imports()) {
        text += describe(b) + "\n";
        j.push_back(wire::to_json(b));
      }
      return done(text, j);
    };
  });
  auto* imp_remove = imp->add_subcommand("remove", "Delete a binding");
  imp_remove->add_option("id", binding_id)->required();
  imp_remove->callback([&] {
    action = [&] {
      client().delete_import(binding_id);
      return done("removed " + binding_id, Json{{"id", binding_id}});
    };
  });

  // agent run
  auto* agent_cmd = app.add_subcommand("agent", "Workbook sync agent")->require_subcommand(1);
  auto* agent_run = agent_cmd->add_subcommand("run", "Run the sync loop for a workbook");
  std::string workbook_id, listen_host = "127.0.0.1";
  std::int64_t interval_ms = -1, ticks = -1;
  int listen_port = -1;
  agent_run->add_option("--workbook", workbook_path, "Workbook file (default: from the agent config)");
  agent_run->add_option("--id", workbook_id, "Id for a new workbook (default: the file stem)");
  agent_run->add_option("--interval", interval_ms, "Poll interval in ms (default: config, else 5000)");
  auto* ticks_opt = agent_run->add_option("--ticks", ticks, "Run this many ticks, then exit");
  agent_run->add_option("--listen", listen_port, "Serve the loopback API on this port (0: any)")->excludes(ticks_opt);
  agent_run->add_option("--host", listen_host, "Loopback API address");
  agent_run->callback([&] {
    action = [&] {
      auto cfg = config();
      auto path = workbook_path.empty() ? cfg.workbook : workbook_path;
      if (path.empty()) throw Error(ErrorKind::Parse, "pass --workbook or set workbook in the agent config");
      auto interval = std::chrono::milliseconds(interval_ms >= 0 ? interval_ms : cfg.poll_interval_ms);
      agent::Agent a(load_or_create_workbook(path, workbook_id), client());
      agent::RunnerOptions opts;
      opts.interval = interval;
      opts.workbook_path = path;
      opts.listen_host = listen_host;
      opts.listen_port = listen_port;
      agent::AgentRunner runner(a, opts);
      if (ticks >= 0) {
        Json reports = Json::array();
        agent::TickReport last;
        for (std::int64_t i = 0; i < ticks && !ctx.should_stop(); ++i) {
          if (i > 0) sleep_unless_stopped(ctx, interval);
          last = runner.tick_now();
          reports.push_back(agent::tick_report_json(last));
          if (!g.json) *ctx.progress << reports.back().dump() << std::endl;
        }
        std::string summary = std::to_string(reports.size()) + " ticks, " + std::to_string(a.pending().size()) +
                              " contributions pending";
        if (ticks > 0 && !last.online)
          return CommandOutcome{kServerError, "error: platform unreachable; " + summary, reports};
        if (!last.problems.empty()) return CommandOutcome{kUserError, "error: " + last.problems.front(), reports};
        return done(summary, reports);
      }
      runner.start();
      *ctx.progress << "agent running for workbook " << a.workbook().id() << " (" << path << ")";
      if (runner.port() >= 0) *ctx.progress << ", loopback API on http://" << listen_host << ":" << runner.port();
      *ctx.progress << std::endl;
      while (!ctx.should_stop()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      runner.stop();
      return done("agent stopped", Json{{"stopped", true}});
    };
  });

  // cell set/get
  auto* cell = app.add_subcommand("cell", "Read or edit a cell")->require_subcommand(1);
  std::string addr_text, input, agent_url;
  auto add_target = [&](CLI::App* sub) {
    auto* w = sub->add_option("--workbook", workbook_path, "Edit this workbook file directly (agent not running)");
    sub->add_option("--agent", agent_url, "Go through a running agent's loopback API")->excludes(w);
  };
  auto local_call = [&](const std::string& method, const std::string& addr, const Json& body) {
    auto t = ctx.connect(agent_url);
    auto res = t->send(wire::HttpRequest{method, "/local/cells/" + agent::encode_segment(addr),
                                         body.is_null() ? std::string() : body.dump(), {}});
    if (res.status != 200) throw wire::error_from_response(res);
    return wire::parse_body(res.body);
  };
  auto workbook_for_cell = [&] {
    auto path = workbook_path.empty() ? config().workbook : workbook_path;
    if (path.empty()) throw Error(ErrorKind::Parse, "pass --workbook or --agent");
    return path;
  };
  auto* cell_set = cell->add_subcommand("set", "Edit a cell; \"=...\" enters a formula");
  cell_set->add_option("addr", addr_text, "Cell, e.g. Sales!B2")->required();
  cell_set->add_option("value", input, "New input")->required();
  add_target(cell_set);
  cell_set->callback([&] {
    action = [&] {
      auto addr = model::parse_address(addr_text);
      Json changes = Json::array();
      if (!agent_url.empty()) {
        changes = local_call("PUT", addr.to_string(), Json{{"input", input}})["changes"];
      } else {
        auto path = workbook_for_cell();
        agent::Agent a(load_or_create_workbook(path, {}),
                       agent::PlatformClient(ctx.connect(server_url()), std::string()));
        for (const auto& [at, change] : a.edit(addr, input))
          changes.push_back({{"addr", at.to_string()}, {"before", change.before.display()}, {"after", change.after.display()}});
        save_workbook(path, a.workbook());
      }
      std::string text;
      for (const auto& c : changes)
        text += c["addr"].get<std::string>() + ": " + c["before"].get<std::string>() + " -> " +
                c["after"].get<std::string>() + "\n";
      if (text.empty()) text = "no value changed\n";
      return done(text, Json{{"changes", changes}});
    };
  });
  auto* cell_get = cell->add_subcommand("get", "Show a cell");
  cell_get->add_option("addr", addr_text, "Cell, e.g. Sales!B2")->required();
  add_target(cell_get);
  cell_get->callback([&] {
    action = [&] {
      auto addr = model::parse_address(addr_text);
      Json j;
      if (!agent_url.empty()) {
        j = local_call("GET", addr.to_string(), nullptr);
      } else {
        auto wb = load_workbook(workbook_for_cell());
        engine::evaluate_in_place(wb);
        const auto* c = wb.cell(addr);
        j = Json{{"addr", addr.to_string()},
                 {"input", c ? c->input_text() : std::string()},
                 {"value", wb.value(addr).display()}};
      }
      return done(j["addr"].get<std::string>() + " = " + j["value"].get<std::string>() + "  (input " +
                      j["input"].get<std::string>() + ")",
                  j);
    };
  });

  // scenario replay
  auto* scenario = app.add_subcommand("scenario", "Scripted multi-agent traces")->require_subcommand(1);
  std::string trace_path, snapshot_out;
  bool verbose = false;
  auto* replay = scenario->add_subcommand("replay", "Run a trace against an in-process platform");
  replay->add_option("file", trace_path)->required();
  replay->add_option("--snapshot", snapshot_out, "Write the final snapshot to this file");
  replay->add_flag("--verbose", verbose, "Print the transcript");
  replay->callback([&] {
    action = [&] {
      auto result = replay_scenario_file(trace_path);
      if (!snapshot_out.empty()) agent::save_text_file(snapshot_out, result.snapshot.dump(2) + "\n");
      std::string text;
      if (verbose)
        for (const auto& t : result.transcript) text += t + "\n";
      for (const auto& f : result.failures) text += "FAILED " + f + "\n";
      text += result.ok ? "scenario ok (" + std::to_string(result.transcript.size()) + " directives)"
                        : "scenario failed";
      Json j{{"ok", result.ok}, {"failures", result.failures}, {"snapshot", result.snapshot}};
      return CommandOutcome{result.ok ? kOk : kUserError, text, j};
    };
  });

  // serve
  auto* serve = app.add_subcommand("serve", "Run the platform");
  std::string settings_file, data_dir, listen, workers_text, sweep_text, admin_id, admin_secret, hash_text;
  serve->add_option("--settings", settings_file, "JSON settings file (env DISCOM_SETTINGS)");
  auto* o_data = serve->add_option("--data-dir", data_dir, "State directory (env DISCOM_DATA_DIR)");
  auto* o_listen = serve->add_option("--listen", listen, "HOST:PORT (env DISCOM_LISTEN, default 127.0.0.1:8080)");
  auto* o_workers = serve->add_option("--workers", workers_text, "Propagation workers (env DISCOM_WORKERS)");
  auto* o_sweep = serve->add_option("--sweep-interval", sweep_text, "Sweep period in ms (env DISCOM_SWEEP_INTERVAL_MS)");
  auto* o_admin = serve->add_option("--admin", admin_id, "Administrator created on first start (env DISCOM_ADMIN)");
  auto* o_secret = serve->add_option("--admin-secret", admin_secret, "Its secret (env DISCOM_ADMIN_SECRET)");
  auto* o_hash = serve->add_option("--hash-strength", hash_text, "interactive or minimum (env DISCOM_HASH_STRENGTH)");
  serve->callback([&] {
    action = [&] {
      auto file = settings_file.empty() ? ctx.env("DISCOM_SETTINGS").value_or("") : settings_file;
      Settings s(ctx, file);
      server::PlatformOptions opts;
      opts.data_dir = s.get(o_data, data_dir, "DISCOM_DATA_DIR", "data_dir", "discom-data");
      opts.workers = static_cast<unsigned>(parse_count(s.get(o_workers, workers_text, "DISCOM_WORKERS", "workers", "2"), "workers"));
      opts.sweep_interval = std::chrono::milliseconds(
          parse_count(s.get(o_sweep, sweep_text, "DISCOM_SWEEP_INTERVAL_MS", "sweep_interval_ms", "60000"), "sweep interval"));
      auto hash = s.get(o_hash, hash_text, "DISCOM_HASH_STRENGTH", "hash_strength", "interactive");
      if (hash != "interactive" && hash != "minimum") throw Error(ErrorKind::Parse, "unknown hash strength " + hash);
      opts.hash_strength = hash == "minimum" ? server::HashStrength::Minimum : server::HashStrength::Interactive;
      auto addr = s.get(o_listen, listen, "DISCOM_LISTEN", "listen", "127.0.0.1:8080");
      auto colon = addr.rfind(':');
      if (colon == std::string::npos) throw Error(ErrorKind::Parse, "listen address must be HOST:PORT");
      auto host = addr.substr(0, colon);
      auto port = static_cast<int>(parse_count(addr.substr(colon + 1), "port"));
      auto admin_user = s.get(o_admin, admin_id, "DISCOM_ADMIN", "admin", "admin");
      auto secret = s.get(o_secret, admin_secret, "DISCOM_ADMIN_SECRET", "admin_secret", "");

      server::Platform platform(opts);
      if (!secret.empty()) platform.bootstrap_admin(admin_user, secret);
      server::ApiService api(platform);
      server::HttpServer http(api);
      auto bound = http.start(host, port);
      *ctx.progress << "discom platform listening on http://" << host << ":" << bound << std::endl;
      while (!ctx.should_stop()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      http.stop();
      return done("platform stopped", Json{{"stopped", true}});
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  std::ostringstream out, err;
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    if (code == 0) return done(out.str());
    return CommandOutcome{kUserError, err.str() + out.str() + app.help(),
                          Json{{"error", "usage"}, {"message", e.what()}}};
  }

  CommandOutcome outcome;
  try {
    outcome = action();
  } catch (const Error& e) {
    outcome = failed(exit_code_for(e.kind()), e.what(), std::string(to_string(e.kind())));
  } catch (const std::exception& e) {
    outcome = failed(kServerError, e.what(), "internal");
  }
  if (g.json) outcome.text = (outcome.json.is_null() ? Json::object() : outcome.json).dump(2);
  return outcome;
}

int main_entry(int argc, char** argv) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::vector<std::string> args(argv + 1, argv + argc);
  auto outcome = run_command(args);
  auto& stream = outcome.exit_code == kOk ? std::cout : std::cerr;
  if (!outcome.text.empty()) {
    stream << outcome.text;
    if (outcome.text.back() != '\n') stream << '\n';
  }
  return outcome.exit_code;
}

}  // namespace discom::cli
