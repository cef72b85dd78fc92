#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "discom/agent/client.hpp"
#include "discom/error.hpp"
#include "discom/wire/json.hpp"

namespace discom::cli {

enum ExitCode : int { kOk = 0, kUserError = 1, kServerError = 2 };

/// Transport failures (including 5xx answers) are server errors; every
/// other failure is the caller's to fix.
int exit_code_for(ErrorKind kind) noexcept;

struct CommandOutcome {
  int exit_code = kOk;
  std::string text;  // human-readable; usage or the error on failure
  wire::Json json;   // printed instead of text under --json
};

struct CliContext {
  /// Opens a transport to a platform or agent URL. Defaults to HTTP.
  std::function<std::shared_ptr<agent::Transport>(const std::string& url)> connect;
  /// Environment lookup. Defaults to std::getenv.
  std::function<std::optional<std::string>(const std::string& name)> env;
  /// Progress of long-running commands (agent run, serve). Defaults to std::cout.
  std::ostream* progress = nullptr;
  /// Polled by long-running commands; true ends them. Defaults to SIGINT/SIGTERM.
  std::function<bool()> should_stop;
};

/// One invocation without the program name, e.g. {"space", "list"}.
CommandOutcome run_command(const std::vector<std::string>& args, const CliContext& ctx = {});

/// Runs argv and prints the outcome; returns the exit code.
int main_entry(int argc, char** argv);

/// Per-user agent settings, stored as JSON at $DISCOM_CONFIG or
/// ~/.config/discom/agent.json.
struct AgentConfig {
  std::string server;
  std::string user;
  std::string token;
  std::int64_t poll_interval_ms = 5000;
  std::string workbook;
};

std::string default_config_path(const CliContext& ctx);
/// Missing file gives defaults; unreadable JSON is Error(Parse).
AgentConfig load_agent_config(const std::string& path);
void save_agent_config(const std::string& path, const AgentConfig& config);

}  // namespace discom::cli
