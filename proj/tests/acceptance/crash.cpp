#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <optional>
#include <random>
#include <thread>

#include "discom/agent/client.hpp"
#include "discom/error.hpp"
#include "discom/model/range_image.hpp"
#include "discom/server/store.hpp"

#include "criteria.hpp"
#include "../support/harness.hpp"

namespace discom::acceptance {

namespace {

struct Server {
  pid_t pid = -1;
  std::string url;  // empty when the process died before listening
};

Server spawn(const std::string& self, const std::string& dir, const std::string& fault) {
  int fds[2];
  if (::pipe(fds) != 0) return {};
  pid_t pid = ::fork();
  if (pid == 0) {
    ::dup2(fds[1], STDOUT_FILENO);
    ::close(fds[0]);
    ::close(fds[1]);
    if (fault.empty()) ::unsetenv("DISCOM_FAULT_CRASH_AT");
    else ::setenv("DISCOM_FAULT_CRASH_AT", fault.c_str(), 1);
    for (const char* v : {"DISCOM_SETTINGS", "DISCOM_LISTEN", "DISCOM_DATA_DIR", "DISCOM_WORKERS"}) ::unsetenv(v);
    ::execl(self.c_str(), self.c_str(), "--cli", "serve", "--data-dir", dir.c_str(), "--listen", "127.0.0.1:0",
            "--admin-secret", "admin-secret", "--hash-strength", "minimum", "--workers", "1",
            static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(fds[1]);
  Server s{pid, {}};
  FILE* in = ::fdopen(fds[0], "r");
  char line[256];
  if (in && std::fgets(line, sizeof line, in)) {
    std::string text(line);
    if (auto at = text.find("http://"); at != std::string::npos) {
      s.url = text.substr(at);
      while (!s.url.empty() && (s.url.back() == '\n' || s.url.back() == '\r')) s.url.pop_back();
    }
  }
  if (in) std::fclose(in);  // later output goes nowhere; the server only logs on exit
  return s;
}

int reap(pid_t pid) {
  int status = 0;
  ::waitpid(pid, &status, 0);
  return status;
}

void stop(Server& s) {
  ::kill(s.pid, SIGTERM);
  reap(s.pid);
}

// What the client was told, plus the one operation that may have been cut off.
struct Model {
  std::map<std::string, std::vector<std::string>> versions;  // export -> encoded cells per version
  std::optional<std::pair<std::string, std::string>> in_flight;  // export ("" = new) and cells
};

std::string cells_of(const model::RangeImage& img) {
  std::string out;
  for (const auto& c : img.cells) out += c.display() + "|";
  return out;
}

// Runs operations until the platform stops answering or the budget is spent.
void workload(const std::string& url, const std::string& space, std::mt19937_64& rng, Model& m, int budget) {
  agent::PlatformClient c(std::make_shared<agent::HttpTransport>(url, 2));
  try {
    c.login("worker", "worker-secret");
  } catch (const Error&) {
    return;
  }
  std::uniform_int_distribution<int> value(0, 999);
  for (int op = 0; op < budget; ++op) {
    bool new_export = m.versions.empty() || std::uniform_int_distribution<int>(0, 5)(rng) == 0;
    try {
      if (new_export) {
        m.in_flight = std::make_pair(std::string(), std::string());
        auto d = c.register_export(space, "e" + std::to_string(op), "", model::parse_range("S!A1:B2"), {});
        m.versions[d.id];
      } else {
        auto it = std::next(m.versions.begin(),
                            std::uniform_int_distribution<long>(0, static_cast<long>(m.versions.size()) - 1)(rng));
        model::RangeImage img{it->first, 1, 2, 2, {}};
        for (int i = 0; i < 4; ++i) img.cells.emplace_back(static_cast<double>(value(rng)));
        m.in_flight = std::make_pair(it->first, cells_of(img));
        c.push(it->first, img, static_cast<std::int64_t>(it->second.size()));
        it->second.push_back(cells_of(img));
      }
      m.in_flight.reset();
    } catch (const Error&) {
      return;  // the in-flight operation stays undecided
    }
  }
}

// Empty when the recovered state is the acknowledged one, possibly with the
// in-flight operation applied; otherwise what differs.
std::string compare(const server::PlatformState& s, const Model& m) {
  std::map<std::string, std::vector<std::string>> seen;
  for (const auto& [id, rec] : s.exports) {
    auto& v = seen[id];
    for (const auto& sv : rec.versions) v.push_back(cells_of(*sv.image));
    if (rec.descriptor.latest_version != static_cast<std::int64_t>(rec.versions.size()))
      return id + " claims version " + std::to_string(rec.descriptor.latest_version) + " but holds " +
             std::to_string(rec.versions.size());
  }
  if (seen == m.versions) return {};
  if (m.in_flight) {
    auto with = m.versions;
    const auto& [id, cells] = *m.in_flight;
    if (id.empty()) {
      // A registration may have committed without its answer arriving.
      for (const auto& [sid, v] : seen)
        if (!with.contains(sid) && v.empty() && seen.size() == with.size() + 1) with[sid];
    } else {
      with[id].push_back(cells);
    }
    if (seen == with) return {};
  }
  for (const auto& [id, v] : seen) {
    auto it = m.versions.find(id);
    if (it == m.versions.end()) return "unexpected export " + id;
    if (it->second != v)
      return id + " recovered " + std::to_string(v.size()) + " versions, acknowledged " +
             std::to_string(it->second.size());
  }
  return "acknowledged exports are missing";
}

}  // namespace

Verdict crash_safety(const std::string& self) {
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(7007);
  const char* steps[] = {"blob", "before-manifest", "after-manifest"};
  int hooked = 0, killed = 0, reopened = 0;

  for (int trial = 0; trial < 24; ++trial) {
    testing::TempDir dir;
    auto where = "trial " + std::to_string(trial) + ": ";

    // A clean first run creates the account and the space.
    auto s = spawn(self, dir.path.string(), "");
    if (s.url.empty()) return {false, where + "platform did not start"};
    std::string space;
    try {
      agent::PlatformClient admin(std::make_shared<agent::HttpTransport>(s.url, 5));
      admin.login("admin", "admin-secret");
      admin.add_user("worker", "worker", "worker-secret", false);
      agent::PlatformClient w(std::make_shared<agent::HttpTransport>(s.url, 5));
      w.login("worker", "worker-secret");
      space = w.create_space("s").id;
    } catch (const Error& e) {
      stop(s);
      return {false, where + "setup failed: " + e.what()};
    }
    stop(s);

    Model m;
    std::string fault;
    bool by_signal = trial % 3 == 2;
    if (!by_signal) {
      fault = std::string(steps[(trial / 3 + trial % 3) % 3]) + ":" +
              std::to_string(std::uniform_int_distribution<int>(1, 8)(rng));
    }
    s = spawn(self, dir.path.string(), fault);
    if (s.url.empty()) return {false, where + "platform did not start before the fault"};
    std::thread assassin;
    if (by_signal) {
      auto delay = std::chrono::milliseconds(std::uniform_int_distribution<int>(5, 120)(rng));
      assassin = std::thread([pid = s.pid, delay] {
        std::this_thread::sleep_for(delay);
        ::kill(pid, SIGKILL);
      });
    }
    workload(s.url, space, rng, m, 60);
    if (assassin.joinable()) assassin.join();
    if (!by_signal) ::kill(s.pid, SIGKILL);  // the fault may not have fired within the budget
    int status = reap(s.pid);
    if (WIFEXITED(status) && WEXITSTATUS(status) == 86) ++hooked;
    if (WIFSIGNALED(status)) ++killed;

    // Restart cleanly: it must come up and serve the recovered state.
    s = spawn(self, dir.path.string(), "");
    if (s.url.empty()) return {false, where + "platform failed to restart after " + (fault.empty() ? "SIGKILL" : fault)};
    try {
      agent::PlatformClient w(std::make_shared<agent::HttpTransport>(s.url, 5));
      w.login("worker", "worker-secret");
      for (const auto& d : w.catalog()) {
        if (d.latest_version == 0) continue;
        if (auto img = w.latest_image(d.id); img.version != d.latest_version)
          throw Error(ErrorKind::Integrity, d.id + " serves version " + std::to_string(img.version));
      }
    } catch (const Error& e) {
      stop(s);
      return {false, where + "restarted platform misbehaves: " + e.what()};
    }
    stop(s);
    ++reopened;

    server::PlatformState state;
    try {
      state = server::Store(dir.path).load();
    } catch (const Error& e) {
      return {false, where + "store unreadable: " + e.what()};
    }
    if (auto diff = compare(state, m); !diff.empty())
      return {false, where + "after " + (fault.empty() ? "SIGKILL" : fault) + ": " + diff};
  }
  return {true, std::to_string(reopened) + " crashes (" + std::to_string(hooked) + " at commit steps, " +
                    std::to_string(killed) + " by SIGKILL) recovered to the acknowledged state, " +
                    fmt_seconds(seconds_since(t0))};
}

}  // namespace discom::acceptance
