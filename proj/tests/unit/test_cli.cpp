#include <doctest.h>

#include <fstream>
#include <sstream>

#include "discom/agent/runner.hpp"
#include "discom/cli/cli.hpp"
#include "discom/cli/scenario.hpp"
#include "discom/error.hpp"
#include "discom/model/range_image.hpp"
#include "../support/harness.hpp"

using namespace discom;
using cli::CommandOutcome;
using testing::TempDir;
using wire::Json;

namespace {

// A CLI wired to an in-process platform, with a private environment and
// agent config file.
struct Cli {
  testing::Harness h;
  TempDir dir;
  std::map<std::string, std::string> env;
  std::shared_ptr<agent::LoopbackTransport> net = h.transport();
  std::ostringstream progress;
  cli::CliContext ctx;

  Cli() {
    for (const char* u : {"carl", "john", "mary"}) h.add_user(u);
    env["DISCOM_CONFIG"] = (dir.path / "agent.json").string();
    ctx.connect = [this](const std::string&) { return net; };
    ctx.env = [this](const std::string& k) -> std::optional<std::string> {
      auto it = env.find(k);
      return it == env.end() ? std::nullopt : std::optional<std::string>(it->second);
    };
    ctx.progress = &progress;
    ctx.should_stop = [] { return false; };
  }

  CommandOutcome run(std::vector<std::string> args) { return cli::run_command(args, ctx); }

  CommandOutcome as(const std::string& user, std::vector<std::string> args) {
    args.insert(args.begin(), {"--token", h.platform.login(user, user + "-secret")});
    return run(std::move(args));
  }
};

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == ' ')) s.pop_back();
  return s;
}

}  // namespace

TEST_CASE("space create and add-member, then list shows both members") {
  Cli c;
  auto created = c.as("carl", {"space", "create", "Area North 2010"});
  REQUIRE(created.exit_code == 0);
  auto id = trim(created.text);
  CHECK(id.rfind("space-", 0) == 0);

  auto added = c.as("carl", {"space", "add-member", "john", "--role", "exporter"});
  CHECK(added.exit_code == 0);

  auto listed = c.as("carl", {"--json", "space", "list"});
  REQUIRE(listed.exit_code == 0);
  auto j = Json::parse(listed.text);
  REQUIRE(j.size() == 1);
  CHECK(j[0]["id"] == id);
  CHECK(j[0]["members"].size() == 2);
  CHECK(j[0]["members"]["john"] == "exporter");
}

TEST_CASE("export register prints the descriptor id; restricted to the named user") {
  Cli c;
  auto space = c.h.platform.create_space("carl", "Area North 2010").id;
  c.h.platform.add_member("carl", space, "john", composition::MemberRole::Exporter);
  c.h.platform.add_member("carl", space, "mary", composition::MemberRole::Both);

  auto out = c.as("john", {"export", "register", "--range", "Sales!A2:D6", "--to", "carl"});
  REQUIRE(out.exit_code == 0);
  auto id = trim(out.text);
  auto catalog = c.h.platform.catalog("carl");
  REQUIRE(catalog.size() == 1);
  CHECK(catalog[0].id == id);
  CHECK(catalog[0].space == space);
  CHECK(catalog[0].range.to_string() == "Sales!A2:D6");
  CHECK(catalog[0].visibility == composition::Visibility::restricted({"carl"}));
  CHECK(c.h.platform.catalog("mary").empty());

  auto revoke = c.as("mary", {"export", "revoke", id});
  CHECK(revoke.exit_code == 1);
  CHECK(revoke.json["error"] == "authorization");
  CHECK(c.as("john", {"export", "revoke", id}).exit_code == 0);
}

TEST_CASE("space inference refuses to guess between several spaces") {
  Cli c;
  c.h.platform.create_space("carl", "a");
  c.h.platform.create_space("carl", "b");
  auto out = c.as("carl", {"space", "add-member", "john", "--role", "importer"});
  CHECK(out.exit_code == 1);
  CHECK(out.text.find("--space") != std::string::npos);
}

TEST_CASE("usage errors exit 1, transport failures exit 2") {
  Cli c;
  auto unknown = c.run({"frobnicate"});
  CHECK(unknown.exit_code == 1);
  CHECK(unknown.text.find("Usage") != std::string::npos);

  auto bad_flag = c.as("carl", {"space", "list", "--bogus"});
  CHECK(bad_flag.exit_code == 1);

  auto missing = c.run({"space"});
  CHECK(missing.exit_code == 1);

  auto help = c.run({"--help"});
  CHECK(help.exit_code == 0);
  CHECK(help.text.find("scenario") != std::string::npos);

  c.net->set_online(false);
  auto down = c.as("carl", {"space", "list"});
  CHECK(down.exit_code == 2);

  c.net->set_online(true);
  auto denied = c.as("john", {"admin", "user", "add", "eve", "--secret", "x"});
  CHECK(denied.exit_code == 1);
  CHECK(denied.json["error"] == "authorization");
  CHECK(c.as("admin", {"admin", "user", "add", "eve", "--secret", "x"}).exit_code == 0);
  auto users = c.as("admin", {"--json", "admin", "user", "list"});
  CHECK(Json::parse(users.text).size() == 5);
  CHECK(users.text.find("credential") == std::string::npos);
}

TEST_CASE("login stores the session; flag beats env beats config") {
  Cli c;
  auto out = c.run({"login", "john", "--secret", "john-secret"});
  REQUIRE(out.exit_code == 0);
  auto cfg = cli::load_agent_config(c.env["DISCOM_CONFIG"]);
  CHECK(cfg.user == "john");
  CHECK(cfg.token == trim(out.text));
  CHECK(trim(c.run({"whoami"}).text) == "john");

  c.env["DISCOM_TOKEN"] = c.h.platform.login("mary", "mary-secret");
  CHECK(trim(c.run({"whoami"}).text) == "mary");
  CHECK(trim(c.as("carl", {"whoami"}).text) == "carl");

  CHECK(c.run({"login", "john", "--secret", "wrong"}).exit_code == 1);
  c.env.erase("DISCOM_TOKEN");
  std::filesystem::remove(c.env["DISCOM_CONFIG"]);
  auto anonymous = c.run({"whoami"});
  CHECK(anonymous.exit_code == 1);
  CHECK(anonymous.json["error"] == "authentication");
}

TEST_CASE("cell set while the agent is offline reaches the platform on reconnect") {
  Cli c;
  auto space = c.h.platform.create_space("carl", "Area").id;
  c.h.platform.add_member("carl", space, "john", composition::MemberRole::Both);
  c.env["DISCOM_TOKEN"] = c.h.platform.login("john", "john-secret");
  auto wb = (c.dir.path / "john.xml").string();

  REQUIRE(c.run({"cell", "set", "Sales!B2", "3", "--workbook", wb}).exit_code == 0);
  auto reg = c.run({"export", "register", "--range", "Sales!A2:D6", "--to", "carl", "--workbook", wb});
  REQUIRE(reg.exit_code == 0);
  auto id = trim(reg.text);
  REQUIRE(c.run({"agent", "run", "--workbook", wb, "--ticks", "1", "--interval", "0"}).exit_code == 0);
  CHECK(c.h.platform.latest_image("carl", id).version == 1);

  c.net->set_online(false);
  REQUIRE(c.run({"cell", "set", "Sales!B2", "10", "--workbook", wb}).exit_code == 0);
  auto offline = c.run({"agent", "run", "--workbook", wb, "--ticks", "1", "--interval", "0"});
  CHECK(offline.exit_code == 2);
  CHECK(offline.text.find("1 contributions pending") != std::string::npos);

  c.net->set_online(true);
  auto online = c.run({"agent", "run", "--workbook", wb, "--ticks", "1", "--interval", "0"});
  CHECK(online.exit_code == 0);
  auto img = c.h.platform.latest_image("carl", id);
  CHECK(img.version == 2);
  CHECK(img.at(0, 1) == model::CellValue(10.0));

  auto got = c.run({"--json", "cell", "get", "Sales!B2", "--workbook", wb});
  CHECK(Json::parse(got.text)["value"] == "10");
}

TEST_CASE("cell commands through a running agent's loopback API") {
  Cli c;
  auto space = c.h.platform.create_space("carl", "Area").id;
  c.h.platform.add_member("carl", space, "john", composition::MemberRole::Both);
  agent::Agent a(model::Workbook("wb"), c.h.client("john"));
  a.register_export(space, "s", "", model::parse_range("S!A1:A2"), composition::Visibility::space_wide());
  agent::AgentRunner runner(a, agent::RunnerOptions{});
  auto local = std::make_shared<agent::LoopbackTransport>(
      [&](const wire::HttpRequest& r) { return runner.handle_local(r); });
  c.ctx.connect = [&](const std::string& url) -> std::shared_ptr<agent::Transport> {
    CHECK(url == "http://agent");
    return local;
  };

  auto set = c.run({"cell", "set", "S!A2", "=A1+1", "--agent", "http://agent"});
  CHECK(set.exit_code == 0);
  CHECK(trim(set.text) == "S!A2:  -> 1");
  auto get = c.run({"--json", "cell", "get", "S!A2", "--agent", "http://agent"});
  auto j = Json::parse(get.text);
  CHECK(j["input"] == "=A1+1");
  CHECK(j["value"] == "1");
  CHECK(a.pending().size() == 1);

  auto both = c.run({"cell", "get", "S!A2", "--agent", "http://agent", "--workbook", "x"});
  CHECK(both.exit_code == 1);
}

TEST_CASE("split_words honours quotes and comments") {
  CHECK(cli::split_words(R"(space carl area "Area North 2010" # trailing)") ==
        std::vector<std::string>{"space", "carl", "area", "Area North 2010"});
  CHECK(cli::split_words("  # only a comment").empty());
  CHECK(cli::split_words(R"(set a S!A1 "say \"hi\"")") == std::vector<std::string>{"set", "a", "S!A1", "say \"hi\""});
  CHECK_THROWS(cli::split_words(R"(set a "open)"));
}

TEST_CASE("scenario replay is deterministic and reports failed expectations") {
  std::filesystem::path trace = DISCOM_SCENARIO_DIR "/car_dealer.trace";
  auto a = cli::replay_scenario_file(trace);
  auto b = cli::replay_scenario_file(trace);
  REQUIRE(a.failures.empty());
  CHECK(a.ok);
  CHECK(a.snapshot.dump() == b.snapshot.dump());
  CHECK(a.snapshot.dump().find("token") == std::string::npos);
  CHECK(a.snapshot.dump().find("$argon2") == std::string::npos);

  std::istringstream wrong(
      "user john\n"
      "agent j john\n"
      "set j S!A1 2\n"
      "expect j S!A1 3\n"
      "fail set j S!A1 =1+\n"
      "fail set j S!A1 4\n"
      "expect j S!A1 4\n");
  auto r = cli::replay_scenario(wrong);
  CHECK_FALSE(r.ok);
  REQUIRE(r.failures.size() == 2);
  CHECK(r.failures[0] == "line 4: j S!A1 is '2', expected '3'");
  CHECK(r.failures[1].rfind("line 6: expected 'set' to fail", 0) == 0);

  std::istringstream broken("user john\nbogus directive\nuser mary\n");
  auto s = cli::replay_scenario(broken);
  CHECK_FALSE(s.ok);
  REQUIRE(s.failures.size() == 1);
  CHECK(s.failures[0] == "line 2: unknown directive 'bogus'");
  CHECK(s.snapshot["platform"]["users"].size() == 2);
}

TEST_CASE("scenario stop and start keep the agent's sync state") {
  std::istringstream trace(
      "user carl\nuser john\n"
      "agent cd john\n"
      "space carl area A\n"
      "member area john both\n"
      "set cd S!A1 1\n"
      "export cd e area S!A1:A1 --to carl\n"
      "tick cd\n"
      "stop cd\n"
      "fail set cd S!A1 2\n"
      "fail stop cd\n"
      "start cd\n"
      "tick cd\n"
      "expect-version e 1\n"
      "set cd S!A1 2\n"
      "tick cd\n"
      "expect-version e 2\n");
  auto r = cli::replay_scenario(trace);
  CHECK(r.ok);
  for (const auto& f : r.failures) MESSAGE(f);
}
