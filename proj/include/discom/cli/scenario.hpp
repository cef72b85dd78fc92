#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "discom/agent/agent.hpp"
#include "discom/server/api.hpp"
#include "discom/server/platform.hpp"
#include "discom/wire/json.hpp"

namespace discom::cli {

// Trace format, one directive per line, '#' starts a comment, words split
// on blanks with "double quotes" for words containing blanks:
//
//   user ID [SECRET]                      account created by the admin
//   agent NAME USER [WORKBOOK_ID]         new in-process agent, empty workbook
//   space USER ALIAS NAME                 USER creates a space
//   member SPACE USER ROLE                space creator adds a member
//   set AGENT ADDR INPUT                  local edit ("=..." for formulas)
//   export AGENT ALIAS SPACE RANGE [--to USER]... [--name N] [--description D]
//   import AGENT ALIAS EXPORT RANGE
//   revoke AGENT EXPORT
//   tick AGENT | tick all                 one sync tick (all: declaration order)
//   offline AGENT | online AGENT          cut or restore the agent's network
//   stop AGENT | start AGENT              end or restart the agent process
//   drain                                 wait for platform propagation
//   expect AGENT ADDR VALUE               computed value, as displayed
//   expect-version EXPORT N               latest committed version
//   expect-pending AGENT N                queued contributions
//   fail DIRECTIVE...                     the directive must raise an error
//
// SPACE, EXPORT and import aliases resolve to platform ids; an unknown alias
// is taken as a literal id.

std::vector<std::string> split_words(std::string_view line);

struct ScenarioOptions {
  server::PlatformOptions platform;  // defaults: workers 0, minimum hashing
  ScenarioOptions();
};

struct ScenarioResult {
  bool ok = true;
  std::vector<std::string> failures;    // "line N: ..."
  std::vector<std::string> transcript;  // one entry per executed directive
  wire::Json snapshot;
};

/// In-process platform plus named agents driven by trace directives.
class Scenario {
 public:
  explicit Scenario(ScenarioOptions options = {});
  ~Scenario();

  /// Runs one directive. Syntax and unexpected command errors throw;
  /// failed expectations are recorded and replay goes on.
  void execute(std::string_view line, int line_no = 0);

  /// Users, spaces, exports with every version, imports, stored workbooks
  /// and each agent's cells and sync state. Never includes tokens or
  /// credentials, so equal traces give equal snapshots.
  wire::Json snapshot() const;

  server::Platform& platform() noexcept { return platform_; }
  agent::Agent& agent(const std::string& name);
  std::string resolve(const std::string& alias) const;
  const std::vector<std::string>& failures() const noexcept { return failures_; }
  const std::vector<std::string>& transcript() const noexcept { return transcript_; }

 private:
  struct Slot;
  void run(const std::vector<std::string>& words, int line_no);
  Slot& slot(const std::string& name);
  agent::PlatformClient& client_of(const std::string& user);
  void check(bool ok, int line_no, const std::string& what);

  server::Platform platform_;
  server::ApiService api_;
  std::map<std::string, std::string> secrets_;
  std::map<std::string, std::unique_ptr<agent::PlatformClient>> clients_;
  std::vector<std::string> agent_order_;
  std::map<std::string, std::unique_ptr<Slot>> agents_;
  std::map<std::string, std::string> aliases_;
  std::vector<std::string> failures_;
  std::vector<std::string> transcript_;
};

/// Replays a whole trace. A directive that errors unexpectedly stops the
/// replay and is reported as a failure.
ScenarioResult replay_scenario(std::istream& trace, ScenarioOptions options = {});
ScenarioResult replay_scenario_file(const std::filesystem::path& path, ScenarioOptions options = {});

}  // namespace discom::cli
