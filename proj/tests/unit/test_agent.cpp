#include <doctest.h>

#include <algorithm>

#include "discom/agent/agent.hpp"
#include "discom/agent/runner.hpp"
#include "discom/error.hpp"
#include "../support/harness.hpp"

using namespace discom;
using agent::Agent;
using composition::MemberRole;
using composition::Visibility;
using model::parse_address;
using model::parse_range;

namespace {

struct Desk {
  testing::Harness h;
  std::string space;
  Desk() {
    for (const char* u : {"carl", "john", "mary"}) h.add_user(u);
    space = h.platform.create_space("carl", "Area").id;
    h.platform.add_member("carl", space, "john", MemberRole::Both);
    h.platform.add_member("carl", space, "mary", MemberRole::Both);
  }

  struct Seat {
    std::shared_ptr<agent::LoopbackTransport> net;
    std::unique_ptr<Agent> agent;
    Agent* operator->() { return agent.get(); }
  };

  Seat seat(const std::string& user, model::Workbook wb) {
    auto net = h.transport();
    auto client = h.client(user, net);
    return Seat{net, std::make_unique<Agent>(std::move(wb), std::move(client))};
  }
};

model::Workbook sales_book(const char* id) {
  model::Workbook wb(id);
  wb.add_sheet("Sales");
  wb.set_input(parse_address("Sales!A1"), "10");
  wb.set_input(parse_address("Sales!B1"), "=A1*2");
  wb.set_input(parse_address("Sales!C1"), "5");
  return wb;
}

std::size_t count_writes(const std::vector<std::string>& log) {
  return std::count_if(log.begin(), log.end(),
                       [](const std::string& l) { return l.rfind("GET", 0) != 0 && l != "POST /api/v1/updates"; });
}

}  // namespace

TEST_CASE("detect_modified_exports compares computed images") {
  Desk d;
  auto s = d.seat("john", sales_book("john"));
  auto e = s->register_export(d.space, "b", "", parse_range("Sales!B1:C1"), Visibility::space_wide());
  CHECK(s->detect_modified_exports() == std::set<std::string>{e.id});  // never pushed
  s->sync_tick();
  CHECK(s->detect_modified_exports().empty());

  s->edit(parse_address("Sales!C1"), "6");
  CHECK(s->detect_modified_exports() == std::set<std::string>{e.id});
  s->sync_tick();
  // A precedent outside the range changes a formula inside it.
  s->edit(parse_address("Sales!A1"), "11");
  CHECK(s->detect_modified_exports() == std::set<std::string>{e.id});
  s->sync_tick();
  s->edit(parse_address("Sales!Z9"), "unrelated");
  CHECK(s->detect_modified_exports().empty());
  // Reverting to the pushed value is not a modification.
  s->edit(parse_address("Sales!C1"), "7");
  s->edit(parse_address("Sales!C1"), "6");
  CHECK(s->detect_modified_exports().empty());
}

TEST_CASE("offline edits coalesce into one push per export") {
  Desk d;
  auto s = d.seat("john", sales_book("john"));
  auto e1 = s->register_export(d.space, "one", "", parse_range("Sales!A1:A1"), Visibility::space_wide());
  auto e2 = s->register_export(d.space, "two", "", parse_range("Sales!C1:C1"), Visibility::space_wide());
  s->sync_tick();
  CHECK(s->online());

  s.net->set_online(false);
  s->edit(parse_address("Sales!C1"), "100");
  CHECK_FALSE(s->sync_tick().online);
  s->edit(parse_address("Sales!A1"), "1");
  s->sync_tick();
  s->edit(parse_address("Sales!C1"), "300");
  s->edit(parse_address("Sales!A1"), "3");
  s->sync_tick();
  CHECK(s->pending().size() == 2);

  s.net->set_online(true);
  s.net->clear_log();
  auto report = s->sync_tick();
  CHECK(report.online);
  CHECK(report.pushed == std::vector<std::string>{e2.id, e1.id});  // first-modified first
  CHECK(s->pending().empty());
  CHECK(count_writes(s.net->log()) == 2);
  CHECK(d.h.platform.latest_image("carl", e1.id).at(0, 0) == model::CellValue(3.0));
  CHECK(d.h.platform.latest_image("carl", e2.id).at(0, 0) == model::CellValue(300.0));
  CHECK(d.h.platform.latest_image("carl", e2.id).version == 2);
}

TEST_CASE("quiet tick makes one poll and nothing else") {
  Desk d;
  auto s = d.seat("john", sales_book("john"));
  s->register_export(d.space, "b", "", parse_range("Sales!B1:B1"), Visibility::space_wide());
  s->sync_tick();
  s.net->clear_log();
  s->sync_tick();
  CHECK(s.net->log() == std::vector<std::string>{"POST /api/v1/updates"});
}

TEST_CASE("delta application re-exports within the same tick") {
  Desk d;
  auto john = d.seat("john", sales_book("john"));
  auto sales = john->register_export(d.space, "sales", "", parse_range("Sales!A1:C1"), Visibility::restricted({"carl"}));
  john->sync_tick();

  model::Workbook asm_wb("asm");
  asm_wb.add_sheet("Perf");
  asm_wb.set_input(parse_address("Perf!A3"), "=A2*100");
  auto carl = d.seat("carl", std::move(asm_wb));
  auto b = carl->bind_import(sales.id, parse_range("Perf!A2:C2"));
  auto cmp = carl->register_export(d.space, "cmp", "", parse_range("Perf!A3:A3"), Visibility::space_wide());
  CHECK(carl->role() == composition::WorkbookRole::Intermediate);

  auto report = carl->sync_tick();
  CHECK(report.applied == std::vector<std::string>{b.id});
  CHECK(std::find(report.pushed.begin(), report.pushed.end(), cmp.id) != report.pushed.end());
  CHECK(report.uploaded);
  CHECK(carl->workbook().value(parse_address("Perf!A3")) == model::CellValue(1000.0));

  CHECK_THROWS_AS(carl->edit(parse_address("Perf!B2"), "9"), Error);
  CHECK(carl->is_imported(parse_address("Perf!C2")));

  // Identical image again: nothing changes.
  composition::UpdateDelta again{b.id, sales.id, d.h.platform.latest_image("carl", sales.id), 1, 1};
  CHECK(carl->apply_import(again).empty());

  // Mismatched delta flags the binding.
  auto wrong = again.image;
  wrong.cols = 2;
  wrong.cells.pop_back();
  CHECK_THROWS_AS(carl->apply_import({b.id, sales.id, wrong, 1, 2}), Error);
  CHECK(carl->imports().at(b.id).broken);
}

TEST_CASE("revoked binding goes stale and ignores deltas") {
  Desk d;
  auto john = d.seat("john", sales_book("john"));
  auto sales = john->register_export(d.space, "s", "", parse_range("Sales!A1:A1"), Visibility::space_wide());
  john->sync_tick();
  auto mary = d.seat("mary", model::Workbook("m"));
  auto b = mary->bind_import(sales.id, parse_range("In!A1:A1"));
  mary->sync_tick();
  CHECK(mary->workbook().value(parse_address("In!A1")) == model::CellValue(10.0));

  d.h.platform.revoke_export("john", sales.id);
  auto report = mary->sync_tick();
  CHECK(report.revoked == std::vector<std::string>{b.id});
  CHECK(mary->imports().at(b.id).stale);
  composition::UpdateDelta late{b.id, sales.id, *d.h.platform.snapshot().exports.at(sales.id).versions[0].image, 1, 2};
  late.image.cells[0] = model::CellValue(99.0);
  CHECK(mary->apply_import(late).empty());
  CHECK(mary->workbook().value(parse_address("In!A1")) == model::CellValue(10.0));
}

TEST_CASE("conflicts: adopt equal image, retry once, then pause") {
  Desk d;
  auto first = d.seat("john", sales_book("john"));
  auto e = first->register_export(d.space, "s", "", parse_range("Sales!A1:A1"), Visibility::space_wide());
  first->sync_tick();

  // A second copy of the same workbook with its own sync state.
  auto second = d.seat("john", first->workbook());
  CHECK(second->exports().at(e.id).acked_version == 1);
  first->edit(parse_address("Sales!A1"), "20");
  first->sync_tick();  // v2

  second->edit(parse_address("Sales!A1"), "20");
  auto r = second->sync_tick();  // conflict, latest equals ours: adopted
  CHECK(r.problems.empty());
  CHECK(second->exports().at(e.id).acked_version == 2);
  CHECK(d.h.platform.latest_image("john", e.id).version == 2);

  second->edit(parse_address("Sales!A1"), "30");
  first->edit(parse_address("Sales!A1"), "25");
  first->sync_tick();  // v3 = 25
  r = second->sync_tick();  // conflict, differs: retried on top, v4 = 30
  CHECK(r.pushed == std::vector<std::string>{e.id});
  CHECK(d.h.platform.latest_image("john", e.id).at(0, 0) == model::CellValue(30.0));

  // Persisting conflict: someone pushes between refresh and retry.
  auto intruder = d.h.client("john");
  auto sneaky = std::make_shared<agent::LoopbackTransport>([&](const wire::HttpRequest& req) {
    auto res = d.h.api.dispatch(req);
    if (req.method == "GET" && req.path.ends_with("/image")) {
      auto latest = d.h.platform.latest_image("john", e.id).version;
      model::RangeImage img{e.id, 1, 1, 1, {model::CellValue(static_cast<double>(1000 + latest))}};
      intruder.push(e.id, img, latest);
    }
    return res;
  });
  auto third = std::make_unique<Agent>(second->workbook(), d.h.client("john", sneaky));
  third->edit(parse_address("Sales!A1"), "40");
  first->edit(parse_address("Sales!A1"), "41");
  first->sync_tick();
  r = third->sync_tick();
  CHECK(third->exports().at(e.id).paused);
  CHECK_FALSE(r.problems.empty());
  CHECK(third->pending().size() == 1);
}

TEST_CASE("sync metadata survives a save and reload") {
  Desk d;
  auto s = d.seat("john", sales_book("john"));
  auto e = s->register_export(d.space, "s", "", parse_range("Sales!B1:C1"), Visibility::space_wide());
  s->sync_tick();
  s.net->set_online(false);
  s->edit(parse_address("Sales!C1"), "9");
  s->sync_tick();
  auto saved = model::encode_workbook(s->workbook());

  auto reloaded = Agent(model::decode_workbook(saved), d.h.client("john"));
  CHECK(reloaded.exports().at(e.id).acked_version == 1);
  CHECK(reloaded.pending().size() == 1);
  auto r = reloaded.sync_tick();
  CHECK(r.pushed == std::vector<std::string>{e.id});
  CHECK(d.h.platform.latest_image("john", e.id).at(0, 1) == model::CellValue(9.0));
}

TEST_CASE("rerun after a lost acknowledgement never regresses") {
  Desk d;
  auto s = d.seat("john", sales_book("john"));
  auto e = s->register_export(d.space, "s", "", parse_range("Sales!A1:A1"), Visibility::space_wide());
  s->sync_tick();
  s->edit(parse_address("Sales!A1"), "77");
  auto before_ack = model::encode_workbook(s->workbook());  // crash point: push done, ack not saved
  s->sync_tick();
  CHECK(d.h.platform.latest_image("john", e.id).version == 2);

  Agent rerun(model::decode_workbook(before_ack), d.h.client("john"));
  auto r = rerun.sync_tick();
  CHECK(r.problems.empty());
  CHECK(d.h.platform.latest_image("john", e.id).version == 2);
  CHECK(rerun.exports().at(e.id).acked_version == 2);
}

TEST_CASE("runner local api") {
  Desk d;
  auto john = d.seat("john", sales_book("john"));
  auto sales = john->register_export(d.space, "s", "", parse_range("Sales!A1:A1"), Visibility::space_wide());
  john->sync_tick();
  auto mary = d.seat("mary", model::Workbook("m"));
  mary->bind_import(sales.id, parse_range("In!A1:A1"));

  agent::AgentRunner runner(*mary.agent, agent::RunnerOptions{std::chrono::milliseconds(3600'000), "", "127.0.0.1", -1});
  runner.start();
  auto call = [&](const char* method, std::string path, std::string body = {}) {
    return runner.handle_local(wire::HttpRequest{method, std::move(path), std::move(body), {}});
  };
  auto tick = call("POST", "/local/tick");
  CHECK(tick.status == 200);
  auto grid = wire::Json::parse(call("GET", "/local/grid").body);
  CHECK(grid["online"] == true);
  CHECK(grid["sheets"][0]["cells"][0]["value"] == "10");
  CHECK(grid["sheets"][0]["cells"][0]["imported"] == true);

  CHECK(call("PUT", "/local/cells/In!A1", R"({"input":"3"})").status == 422);
  auto put = call("PUT", "/local/cells/In!B1", R"({"input":"=A1+1"})");
  CHECK(put.status == 200);
  CHECK(wire::Json::parse(call("GET", "/local/cells/In!B1").body)["value"] == "11");
  CHECK(wire::Json::parse(call("GET", "/local/status").body)["imports"].size() == 1);
  CHECK(call("GET", "/local/nothing").status == 404);
  CHECK(call("GET", "/local/cells/%%%").status == 400);
  runner.stop();
}
