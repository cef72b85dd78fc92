#include "discom/agent/runner.hpp"

#include <httplib.h>

#include <iostream>

#include "discom/error.hpp"
#include "discom/model/address.hpp"

namespace discom::agent {

using wire::HttpRequest;
using wire::HttpResponse;
using wire::Json;

namespace {

const char* value_type(const model::CellValue& v) {
  if (v.is_blank()) return "blank";
  if (v.is_number()) return "n";
  if (v.is_text()) return "s";
  if (v.is_bool()) return "b";
  return "e";
}

Json cell_json(const Agent& agent, const model::CellAddress& addr) {
  const auto* cell = agent.workbook().cell(addr);
  model::CellValue value = cell ? cell->computed : model::CellValue{};
  return Json{{"addr", addr.to_string()},
              {"input", cell ? cell->input_text() : std::string()},
              {"value", value.display()},
              {"type", value_type(value)},
              {"imported", agent.is_imported(addr)}};
}

Json status_json(const Agent& agent) {
  Json exports = Json::array();
  for (const auto& [id, link] : agent.exports()) {
    bool pending = std::any_of(agent.pending().begin(), agent.pending().end(),
                               [&](const PendingPush& p) { return p.export_id == id; });
    exports.push_back({{"id", id},
                       {"name", link.descriptor.name},
                       {"range", link.descriptor.range.to_string()},
                       {"acked_version", link.acked_version},
                       {"pending", pending},
                       {"paused", link.paused},
                       {"revoked", link.descriptor.revoked},
                       {"problem", link.problem}});
  }
  Json imports = Json::array();
  for (const auto& [id, link] : agent.imports())
    imports.push_back({{"id", id},
                       {"export_id", link.binding.export_id},
                       {"target", link.binding.target.to_string()},
                       {"applied_version", link.binding.applied_version},
                       {"stale", link.stale},
                       {"broken", link.broken},
                       {"problem", link.problem}});
  return Json{{"workbook", agent.workbook().id()},
              {"online", agent.online()},
              {"role", std::string(composition::to_string(agent.role()))},
              {"pending", agent.pending().size()},
              {"exports", exports},
              {"imports", imports}};
}

std::string url_decode(const std::string& s) { return httplib::detail::decode_url(s, false); }

}  // namespace

Json tick_report_json(const TickReport& r) {
  return Json{{"online", r.online},
              {"pushed", r.pushed},
              {"applied", r.applied},
              {"revoked", r.revoked},
              {"uploaded", r.uploaded},
              {"problems", r.problems}};
}

AgentRunner::AgentRunner(Agent& agent, RunnerOptions options) : agent_(agent), options_(std::move(options)) {
  agent_.set_checkpoint([this](const Agent&) { save(); });
}

AgentRunner::~AgentRunner() {
  stop();
  agent_.set_checkpoint({});
}

void AgentRunner::save() {
  if (options_.workbook_path.empty()) return;
  save_text_file(options_.workbook_path, model::encode_workbook(agent_.workbook()));
}

void AgentRunner::start() {
  {
    std::lock_guard lk(mu_);
    if (running_) return;
    running_ = true;
    stopping_ = false;
  }
  thread_ = std::thread([this] { loop(); });
  if (options_.listen_port >= 0) {
    http_ = std::make_unique<httplib::Server>();
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      auto out = handle_local(HttpRequest{req.method, req.path, req.body, {}});
      res.status = out.status;
      res.set_content(out.body, "application/json");
    };
    http_->Get(R"(/local/.*)", handler);
    http_->Put(R"(/local/.*)", handler);
    http_->Post(R"(/local/.*)", handler);
    port_ = options_.listen_port == 0 ? http_->bind_to_any_port(options_.listen_host)
                                      : (http_->bind_to_port(options_.listen_host, options_.listen_port)
                                             ? options_.listen_port
                                             : -1);
    if (port_ < 0) {
      stop();
      throw Error(ErrorKind::Transport, "agent cannot listen on " + options_.listen_host + ":" +
                                            std::to_string(options_.listen_port));
    }
    http_thread_ = std::thread([this] { http_->listen_after_bind(); });
    http_->wait_until_ready();
  }
}

void AgentRunner::stop() {
  if (http_) {
    http_->stop();
    if (http_thread_.joinable()) http_thread_.join();
    http_.reset();
  }
  {
    std::lock_guard lk(mu_);
    if (!running_) return;
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
  std::lock_guard lk(mu_);
  running_ = false;
}

void AgentRunner::post(std::function<void()> job) {
  {
    std::lock_guard lk(mu_);
    jobs_.push_back(std::move(job));
  }
  cv_.notify_all();
}

void AgentRunner::loop() {
  auto next_tick = std::chrono::steady_clock::now();
  std::unique_lock lk(mu_);
  for (;;) {
    if (!jobs_.empty()) {
      auto job = std::move(jobs_.front());
      jobs_.pop_front();
      lk.unlock();
      job();
      lk.lock();
      continue;
    }
    if (stopping_) return;
    if (std::chrono::steady_clock::now() >= next_tick) {
      lk.unlock();
      try {
        agent_.sync_tick();
        save();
      } catch (const std::exception& e) {
        std::cerr << "agent tick failed: " << e.what() << "\n";
      }
      lk.lock();
      next_tick = std::chrono::steady_clock::now() + options_.interval;
      continue;
    }
    cv_.wait_until(lk, next_tick, [&] { return stopping_ || !jobs_.empty(); });
  }
}

TickReport AgentRunner::tick_now() {
  return run([](Agent& a) { return a.sync_tick(); });
}

HttpResponse AgentRunner::handle_local(const HttpRequest& request) {
  try {
    auto path = request.path.substr(0, request.path.find('?'));
    const std::string cells = "/local/cells/";
    if (path == "/local/grid" && request.method == "GET") {
      auto body = run([](Agent& a) {
        Json sheets = Json::array();
        for (const auto& sheet : a.workbook().sheets()) {
          Json list = Json::array();
          for (const auto& [pos, _] : sheet.cells())
            list.push_back(cell_json(a, model::CellAddress{sheet.name(), pos.col, pos.row}));
          sheets.push_back({{"name", sheet.name()}, {"cells", list}});
        }
        auto j = status_json(a);
        j["sheets"] = sheets;
        return j;
      });
      return HttpResponse{200, body.dump()};
    }
    if (path == "/local/status" && request.method == "GET")
      return HttpResponse{200, run([](Agent& a) { return status_json(a); }).dump()};
    if (path == "/local/tick" && request.method == "POST") return HttpResponse{200, tick_report_json(tick_now()).dump()};
    if (path.rfind(cells, 0) == 0) {
      auto addr = model::parse_address(url_decode(path.substr(cells.size())));
      if (request.method == "GET") return HttpResponse{200, run([&](Agent& a) { return cell_json(a, addr); }).dump()};
      if (request.method == "PUT") {
        auto body = wire::parse_body(request.body);
        auto input = wire::string_field(body, "input");
        auto out = run([&](Agent& a) {
          Json changes = Json::array();
          for (const auto& [at, change] : a.edit(addr, input))
            changes.push_back({{"addr", at.to_string()}, {"before", change.before.display()}, {"after", change.after.display()}});
          return Json{{"changes", changes}};
        });
        return HttpResponse{200, out.dump()};
      }
    }
    return HttpResponse{404, Json{{"error", "not-found"}, {"message", "no route " + request.path}}.dump()};
  } catch (const Error& e) {
    return HttpResponse{wire::http_status(e.kind()), wire::error_body(e).dump()};
  } catch (const std::exception& e) {
    return HttpResponse{500, Json{{"error", "internal"}, {"message", e.what()}}.dump()};
  }
}

}  // namespace discom::agent
