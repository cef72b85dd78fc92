#include "discom/cli/scenario.hpp"

#include <fstream>
#include <sstream>

#include "discom/agent/runner.hpp"
#include "discom/error.hpp"
#include "discom/model/address.hpp"
#include "discom/model/range_image.hpp"

namespace discom::cli {

using wire::Json;

namespace {

constexpr const char* kAdmin = "admin";
constexpr const char* kAdminSecret = "admin-secret";

// Mistakes in the trace itself; `fail` never absorbs these.
struct TraceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

TraceError syntax(const std::string& msg) { return TraceError(msg); }

void arity(const std::vector<std::string>& w, std::size_t min, std::size_t max, const char* usage) {
  if (w.size() < min || w.size() > max) throw syntax(std::string("usage: ") + usage);
}

std::int64_t to_int(const std::string& s) {
  std::size_t used = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw syntax("expected an integer, got '" + s + "'");
  return v;
}

Json cells_json(const model::Workbook& wb) {
  Json sheets = Json::object();
  for (const auto& sheet : wb.sheets()) {
    Json cells = Json::object();
    for (const auto& [pos, cell] : sheet.cells()) {
      auto addr = model::column_name(pos.col) + std::to_string(pos.row);
      cells[addr] = Json{{"input", cell.input_text()}, {"value", cell.computed.display()}};
    }
    sheets[sheet.name()] = cells;
  }
  return sheets;
}

}  // namespace

std::vector<std::string> split_words(std::string_view line) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size() || line[i] == '#') break;
    std::string word;
    bool quoted = false;
    while (i < line.size() && (quoted || (line[i] != ' ' && line[i] != '\t' && line[i] != '\r'))) {
      char c = line[i++];
      if (c == '"') {
        quoted = !quoted;
      } else if (c == '\\' && quoted && i < line.size()) {
        word += line[i++];
      } else {
        word += c;
      }
    }
    if (quoted) throw syntax("unterminated quote");
    words.push_back(std::move(word));
  }
  return words;
}

ScenarioOptions::ScenarioOptions() {
  platform.workers = 0;
  platform.hash_strength = server::HashStrength::Minimum;
}

struct Scenario::Slot {
  std::string user;
  std::shared_ptr<agent::LoopbackTransport> transport;
  std::string token;
  std::unique_ptr<agent::Agent> agent;
  std::string saved;  // workbook file while the agent is stopped
};

Scenario::Scenario(ScenarioOptions options) : platform_(std::move(options.platform)), api_(platform_) {
  platform_.bootstrap_admin(kAdmin, kAdminSecret);
  secrets_[kAdmin] = kAdminSecret;
}

Scenario::~Scenario() = default;

agent::Agent& Scenario::agent(const std::string& name) {
  auto& s = slot(name);
  if (!s.agent) throw Error(ErrorKind::Precondition, "agent " + name + " is stopped");
  return *s.agent;
}

Scenario::Slot& Scenario::slot(const std::string& name) {
  auto it = agents_.find(name);
  if (it == agents_.end()) throw syntax("unknown agent " + name);
  return *it->second;
}

agent::PlatformClient& Scenario::client_of(const std::string& user) {
  auto it = clients_.find(user);
  if (it != clients_.end()) return *it->second;
  auto secret = secrets_.find(user);
  if (secret == secrets_.end()) throw syntax("unknown user " + user);
  auto t = std::make_shared<agent::LoopbackTransport>([this](const wire::HttpRequest& r) { return api_.dispatch(r); });
  auto c = std::make_unique<agent::PlatformClient>(t);
  c->login(user, secret->second);
  return *clients_.emplace(user, std::move(c)).first->second;
}

std::string Scenario::resolve(const std::string& alias) const {
  auto it = aliases_.find(alias);
  return it == aliases_.end() ? alias : it->second;
}

void Scenario::check(bool ok, int line_no, const std::string& what) {
  if (!ok) failures_.push_back("line " + std::to_string(line_no) + ": " + what);
}

void Scenario::execute(std::string_view line, int line_no) {
  auto words = split_words(line);
  if (words.empty()) return;
  if (words[0] == "fail") {
    words.erase(words.begin());
    if (words.empty()) throw syntax("usage: fail DIRECTIVE...");
    try {
      run(words, line_no);
    } catch (const Error& e) {
      transcript_.push_back("failed as expected: " + std::string(e.what()));
      return;
    }
    check(false, line_no, "expected '" + words[0] + "' to fail");
    return;
  }
  run(words, line_no);
}

void Scenario::run(const std::vector<std::string>& w, int line_no) {
  const auto& cmd = w[0];
  auto note = [&](std::string text) { transcript_.push_back(std::move(text)); };

  if (cmd == "user") {
    arity(w, 2, 3, "user ID [SECRET]");
    auto secret = w.size() == 3 ? w[2] : w[1] + "-secret";
    client_of(kAdmin).add_user(w[1], w[1], secret, false);
    secrets_[w[1]] = secret;
    note("user " + w[1]);
  } else if (cmd == "agent") {
    arity(w, 3, 4, "agent NAME USER [WORKBOOK_ID]");
    if (agents_.contains(w[1])) throw syntax("agent " + w[1] + " already exists");
    auto s = std::make_unique<Slot>();
    s->user = w[2];
    s->transport =
        std::make_shared<agent::LoopbackTransport>([this](const wire::HttpRequest& r) { return api_.dispatch(r); });
    auto secret = secrets_.find(w[2]);
    if (secret == secrets_.end()) throw syntax("unknown user " + w[2]);
    agent::PlatformClient client(s->transport);
    s->token = client.login(w[2], secret->second);
    s->agent = std::make_unique<agent::Agent>(model::Workbook(w.size() == 4 ? w[3] : w[1]), client);
    agent_order_.push_back(w[1]);
    agents_.emplace(w[1], std::move(s));
    note("agent " + w[1]);
  } else if (cmd == "space") {
    arity(w, 4, 4, "space USER ALIAS NAME");
    auto space = client_of(w[1]).create_space(w[3]);
    aliases_[w[2]] = space.id;
    note("space " + w[2] + " = " + space.id);
  } else if (cmd == "member") {
    arity(w, 4, 4, "member SPACE USER ROLE");
    auto id = resolve(w[1]);
    auto role = composition::member_role_from(w[3]);
    std::string creator;
    for (const auto& s : platform_.snapshot().directory.spaces)
      if (s.first == id) creator = s.second.creator;
    if (creator.empty()) throw Error(ErrorKind::NotFound, "unknown space " + w[1]);
    client_of(creator).add_member(id, w[2], role);
    note("member " + w[2] + " of " + id);
  } else if (cmd == "set") {
    arity(w, 4, 4, "set AGENT ADDR INPUT");
    auto changes = agent(w[1]).edit(model::parse_address(w[2]), w[3]);
    note("set " + w[1] + " " + w[2] + " (" + std::to_string(changes.size()) + " changed)");
  } else if (cmd == "export") {
    if (w.size() < 5) throw syntax("usage: export AGENT ALIAS SPACE RANGE [--to USER]... [--name N] [--description D]");
    std::set<std::string> to;
    std::string name = w[2], description;
    for (std::size_t i = 5; i < w.size(); i += 2) {
      if (i + 1 >= w.size()) throw syntax("missing value for " + w[i]);
      if (w[i] == "--to") to.insert(w[i + 1]);
      else if (w[i] == "--name") name = w[i + 1];
      else if (w[i] == "--description") description = w[i + 1];
      else throw syntax("unknown export option " + w[i]);
    }
    auto visibility = to.empty() ? composition::Visibility::space_wide() : composition::Visibility::restricted(to);
    auto d = agent(w[1]).register_export(resolve(w[3]), name, description, model::parse_range(w[4]), visibility);
    aliases_[w[2]] = d.id;
    note("export " + w[2] + " = " + d.id);
  } else if (cmd == "import") {
    arity(w, 5, 5, "import AGENT ALIAS EXPORT RANGE");
    auto b = agent(w[1]).bind_import(resolve(w[3]), model::parse_range(w[4]));
    aliases_[w[2]] = b.id;
    note("import " + w[2] + " = " + b.id);
  } else if (cmd == "revoke") {
    arity(w, 3, 3, "revoke AGENT EXPORT");
    agent(w[1]).client().revoke_export(resolve(w[2]));
    note("revoke " + resolve(w[2]));
  } else if (cmd == "tick") {
    arity(w, 2, 2, "tick AGENT|all");
    std::vector<std::string> names;
    if (w[1] == "all") {
      for (const auto& n : agent_order_)
        if (slot(n).agent) names.push_back(n);
    } else {
      names.push_back(w[1]);
    }
    for (const auto& n : names) {
      auto report = agent(n).sync_tick();
      note("tick " + n + " " + agent::tick_report_json(report).dump());
    }
  } else if (cmd == "offline" || cmd == "online") {
    arity(w, 2, 2, "offline|online AGENT");
    slot(w[1]).transport->set_online(cmd == "online");
    note(cmd + " " + w[1]);
  } else if (cmd == "stop") {
    arity(w, 2, 2, "stop AGENT");
    auto& s = slot(w[1]);
    if (!s.agent) throw Error(ErrorKind::Precondition, "agent " + w[1] + " is already stopped");
    s.saved = model::encode_workbook(s.agent->workbook());
    s.agent.reset();
    note("stop " + w[1]);
  } else if (cmd == "start") {
    arity(w, 2, 2, "start AGENT");
    auto& s = slot(w[1]);
    if (s.agent) throw Error(ErrorKind::Precondition, "agent " + w[1] + " is already running");
    s.agent = std::make_unique<agent::Agent>(model::decode_workbook(s.saved),
                                             agent::PlatformClient(s.transport, s.token));
    s.saved.clear();
    note("start " + w[1]);
  } else if (cmd == "drain") {
    arity(w, 1, 1, "drain");
    platform_.drain();
    note("drain");
  } else if (cmd == "expect") {
    arity(w, 4, 4, "expect AGENT ADDR VALUE");
    auto got = agent(w[1]).workbook().value(model::parse_address(w[2])).display();
    check(got == w[3], line_no, w[1] + " " + w[2] + " is '" + got + "', expected '" + w[3] + "'");
    note("expect " + w[1] + " " + w[2] + " = " + got);
  } else if (cmd == "expect-version") {
    arity(w, 3, 3, "expect-version EXPORT N");
    auto id = resolve(w[1]);
    auto state = platform_.snapshot();
    auto it = state.exports.find(id);
    if (it == state.exports.end()) throw Error(ErrorKind::NotFound, "unknown export " + w[1]);
    auto got = it->second.descriptor.latest_version;
    check(got == to_int(w[2]), line_no, id + " is at version " + std::to_string(got) + ", expected " + w[2]);
    note("expect-version " + id + " = " + std::to_string(got));
  } else if (cmd == "expect-pending") {
    arity(w, 3, 3, "expect-pending AGENT N");
    auto got = static_cast<std::int64_t>(agent(w[1]).pending().size());
    check(got == to_int(w[2]), line_no,
          w[1] + " has " + std::to_string(got) + " pending contributions, expected " + w[2]);
    note("expect-pending " + w[1] + " = " + std::to_string(got));
  } else {
    throw syntax("unknown directive '" + cmd + "'");
  }
}

Json Scenario::snapshot() const {
  auto state = platform_.snapshot();
  Json users = Json::array();
  for (const auto& [id, u] : state.directory.users) users.push_back({{"id", id}, {"name", u.name}, {"admin", u.admin}});
  Json spaces = Json::array();
  for (const auto& [_, s] : state.directory.spaces) spaces.push_back(wire::to_json(s));
  Json exports = Json::array();
  for (const auto& [_, rec] : state.exports) {
    Json versions = Json::array();
    for (std::size_t i = 0; i < rec.versions.size(); ++i)
      versions.push_back({{"version", i + 1},
                          {"author", rec.versions[i].author},
                          {"image", model::encode_range_image(*rec.versions[i].image)}});
    exports.push_back({{"descriptor", wire::to_json(rec.descriptor)}, {"versions", versions}});
  }
  Json imports = Json::array();
  for (const auto& [_, b] : state.imports) imports.push_back(wire::to_json(b));
  Json workbooks = Json::array();
  for (const auto& [id, wb] : state.workbooks)
    workbooks.push_back({{"id", id},
                         {"owner", wb.owner},
                         {"exports", wb.exports},
                         {"imports", wb.imports},
                         {"last_propagated", wb.last_propagated},
                         {"generation", wb.generation},
                         {"document", wb.document}});

  Json agents = Json::object();
  for (const auto& name : agent_order_) {
    const auto& s = *agents_.at(name);
    Json a{{"user", s.user}, {"running", s.agent != nullptr}, {"network", s.transport->online()}};
    if (s.agent) {
      const auto& ag = *s.agent;
      Json ex = Json::object();
      for (const auto& [id, link] : ag.exports())
        ex[id] = {{"acked_version", link.acked_version}, {"paused", link.paused}, {"problem", link.problem}};
      Json im = Json::object();
      for (const auto& [id, link] : ag.imports())
        im[id] = {{"applied_version", link.binding.applied_version}, {"stale", link.stale}, {"broken", link.broken}};
      a["workbook"] = ag.workbook().id();
      a["role"] = std::string(composition::to_string(ag.role()));
      a["cells"] = cells_json(ag.workbook());
      a["exports"] = ex;
      a["imports"] = im;
      a["pending"] = ag.pending().size();
    } else {
      a["document"] = s.saved;
    }
    agents[name] = a;
  }
  return Json{{"platform",
               {{"users", users},
                {"spaces", spaces},
                {"exports", exports},
                {"imports", imports},
                {"workbooks", workbooks},
                {"diagnostics", platform_.diagnostics()}}},
              {"agents", agents}};
}

ScenarioResult replay_scenario(std::istream& trace, ScenarioOptions options) {
  Scenario scenario(std::move(options));
  ScenarioResult result;
  std::string line;
  int line_no = 0;
  while (std::getline(trace, line)) {
    ++line_no;
    try {
      scenario.execute(line, line_no);
    } catch (const std::exception& e) {
      result.failures.push_back("line " + std::to_string(line_no) + ": " + e.what());
      break;
    }
  }
  result.failures.insert(result.failures.begin(), scenario.failures().begin(), scenario.failures().end());
  result.ok = result.failures.empty();
  result.transcript = scenario.transcript();
  result.snapshot = scenario.snapshot();
  return result;
}

ScenarioResult replay_scenario_file(const std::filesystem::path& path, ScenarioOptions options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open scenario " + path.string());
  return replay_scenario(in, std::move(options));
}

}  // namespace discom::cli
