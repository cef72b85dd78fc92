#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "discom/agent/agent.hpp"
#include "discom/wire/json.hpp"

namespace httplib {
class Server;
}

namespace discom::agent {

struct RunnerOptions {
  std::chrono::milliseconds interval{5000};
  std::string workbook_path;  // saved after every tick and command; empty = never saved
  std::string listen_host = "127.0.0.1";
  int listen_port = -1;  // -1 = no loopback HTTP server, 0 = any free port
};

/// Owns the single loop that touches an Agent: periodic ticks plus queued
/// commands from the CLI or the local HTTP API.
class AgentRunner {
 public:
  AgentRunner(Agent& agent, RunnerOptions options);
  ~AgentRunner();

  void start();
  void stop();
  int port() const noexcept { return port_; }

  /// Runs fn on the loop thread (or inline when the loop is not running)
  /// and waits for its result.
  template <class Fn>
  auto run(Fn fn) -> decltype(fn(std::declval<Agent&>()));

  TickReport tick_now();

  /// The loopback API: GET /local/grid, GET|PUT /local/cells/{addr},
  /// GET /local/status, POST /local/tick.
  wire::HttpResponse handle_local(const wire::HttpRequest& request);

 private:
  void post(std::function<void()> job);
  void loop();
  void save();

  Agent& agent_;
  RunnerOptions options_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> jobs_;
  bool running_ = false;
  bool stopping_ = false;
  std::thread thread_;
  std::unique_ptr<httplib::Server> http_;
  std::thread http_thread_;
  int port_ = -1;
};

wire::Json tick_report_json(const TickReport& report);

template <class Fn>
auto AgentRunner::run(Fn fn) -> decltype(fn(std::declval<Agent&>())) {
  using R = decltype(fn(std::declval<Agent&>()));
  bool inline_run;
  {
    std::lock_guard lk(mu_);
    inline_run = !running_ || std::this_thread::get_id() == thread_.get_id();
  }
  if (inline_run) {
    if constexpr (std::is_void_v<R>) {
      fn(agent_);
      save();
      return;
    } else {
      auto r = fn(agent_);
      save();
      return r;
    }
  }
  auto task = std::make_shared<std::packaged_task<R()>>([this, fn]() mutable {
    if constexpr (std::is_void_v<R>) {
      fn(agent_);
      save();
    } else {
      auto r = fn(agent_);
      save();
      return r;
    }
  });
  auto fut = task->get_future();
  post([task] { (*task)(); });
  return fut.get();
}

}  // namespace discom::agent
