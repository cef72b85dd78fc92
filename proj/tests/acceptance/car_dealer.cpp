#include "discom/cli/scenario.hpp"
#include "discom/model/value.hpp"

#include "criteria.hpp"

namespace discom::acceptance {

using wire::Json;

namespace {

struct Dealer {
  const char* name;
  double sold;    // final units over the five models
  double target;  // assigned by the manager
};

}  // namespace

Verdict car_dealer_end_to_end() {
  auto t0 = std::chrono::steady_clock::now();
  auto result = cli::replay_scenario_file(DISCOM_SCENARIO_DIR "/car_dealer.trace");
  double secs = seconds_since(t0);
  if (!result.ok) return {false, "replay failed: " + result.failures.front()};

  // Hand-computed from the trace: John sold 4+4+2+1+2 after his late sale,
  // Mary 2+1+3+0+2, Paul 1+2+1+1+1 after his offline edits.
  const Dealer dealers[] = {{"John Smith", 13, 16}, {"Mary Jones", 8, 32}, {"Paul Green", 6, 8}};
  const auto& agents = result.snapshot["agents"];
  int checked = 0;
  for (const char* viewer : {"cd-john", "cd-mary", "cd-paul", "asm"}) {
    const auto& cmp = agents[viewer]["cells"]["Comparison"];
    for (int i = 0; i < 3; ++i) {
      auto row = std::to_string(2 + i);
      double index = dealers[i].sold / dealers[i].target * 100;
      auto shown = model::parse_number(cmp["D" + row]["value"].get<std::string>());
      if (cmp["A" + row]["value"] != dealers[i].name || !shown || *shown != index)
        return {false, std::string(viewer) + " sees " + cmp["D" + row]["value"].get<std::string>() + " for " +
                           dealers[i].name + ", oracle " + model::format_number(index)};
      ++checked;
    }
  }

  // The comparison must have moved while the manager's agent was stopped,
  // which only the platform's own recalculation can do.
  int platform_versions = 0;
  std::int64_t latest = 0;
  for (const auto& e : result.snapshot["platform"]["exports"]) {
    if (e["descriptor"]["owner"] != "carl") continue;
    latest = e["descriptor"]["latest_version"].get<std::int64_t>();
    for (const auto& v : e["versions"])
      if (v["author"] == "platform") ++platform_versions;
  }
  if (platform_versions == 0) return {false, "no comparison version was produced by the platform"};
  if (secs >= 10) return {false, "replay took " + fmt_seconds(secs)};
  return {true, std::to_string(result.transcript.size()) + " directives, " + std::to_string(checked) +
                    " index cells equal the oracle, comparison at v" + std::to_string(latest) + " (" +
                    std::to_string(platform_versions) + " by the platform), " + fmt_seconds(secs)};
}

}  // namespace discom::acceptance
