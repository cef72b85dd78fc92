#include <doctest.h>

#include <algorithm>
#include <random>

#include "../support/random_workbook.hpp"
#include "discom/engine/dep_graph.hpp"
#include "discom/engine/evaluator.hpp"
#include "discom/engine/parser.hpp"

using namespace discom;
using namespace discom::model;
using namespace discom::engine;

namespace {

std::string shape(std::string_view src) { return to_sexpr(*parse_formula(src)->root); }

CellAddress at(std::string_view a) { return parse_address(a, "S"); }

Workbook sheet_with(std::initializer_list<std::pair<const char*, const char*>> cells) {
  Workbook wb("t");
  wb.add_sheet("S");
  for (auto [addr, text] : cells) wb.set_input(at(addr), text);
  return wb;
}

CellValue eval_one(std::string_view formula) {
  auto wb = sheet_with({});
  wb.set_input(at("Z99"), formula);
  return evaluate_all(wb).value(at("Z99"));
}

std::set<std::string> locals(const std::set<CellAddress>& cells) {
  std::set<std::string> out;
  for (const auto& c : cells) out.insert(c.local());
  return out;
}

// Independent oracle for evaluate_all: cycle status by brute-force DFS over
// references, then values by repeated sweeps in arbitrary order until
// nothing changes (no topological sort involved).
std::map<CellAddress, CellValue> sweep_oracle(const Workbook& input) {
  Workbook wb = input;
  std::map<CellAddress, std::set<CellAddress>> refs;
  for (const auto& sheet : wb.sheets())
    for (const auto& [pos, cell] : sheet.cells())
      if (cell.is_formula())
        refs[CellAddress{sheet.name(), pos.col, pos.row}] = references(*cell.formula().ast, sheet.name());

  auto reaches = [&](const CellAddress& from, const CellAddress& target) {
    // Does `target` depend (transitively) on `from`?
    std::set<CellAddress> seen;
    std::vector<CellAddress> stack{target};
    while (!stack.empty()) {
      auto c = stack.back();
      stack.pop_back();
      auto it = refs.find(c);
      if (it == refs.end()) continue;
      for (const auto& p : it->second) {
        if (p == from) return true;
        if (seen.insert(p).second) stack.push_back(p);
      }
    }
    return false;
  };
  std::set<CellAddress> on_cycle;
  for (const auto& [c, _] : refs)
    if (reaches(c, c)) on_cycle.insert(c);
  std::set<CellAddress> blocked = on_cycle;
  for (const auto& [c, _] : refs)
    for (const auto& k : on_cycle)
      if (reaches(k, c)) blocked.insert(c);

  for (auto& sheet : wb.mutable_sheets())
    for (auto& [pos, cell] : sheet.mutable_cells())
      cell.computed = cell.is_formula() ? CellValue{} : cell.literal();

  for (std::size_t round = 0; round <= refs.size() + 1; ++round) {
    bool changed = false;
    for (auto& sheet : wb.mutable_sheets()) {
      for (auto& [pos, cell] : sheet.mutable_cells()) {
        if (!cell.is_formula()) continue;
        CellAddress a{sheet.name(), pos.col, pos.row};
        CellValue v = blocked.contains(a) ? CellValue(ErrorCode::Cycle)
                                          : evaluate(*cell.formula().ast->root, sheet.name(), wb);
        if (v != cell.computed) {
          cell.computed = v;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }
  std::map<CellAddress, CellValue> out;
  for (const auto& sheet : wb.sheets())
    for (const auto& [pos, cell] : sheet.cells())
      if (!cell.computed.is_blank()) out.emplace(CellAddress{sheet.name(), pos.col, pos.row}, cell.computed);
  return out;
}

std::map<CellAddress, CellValue> computed_map(const Workbook& wb) {
  std::map<CellAddress, CellValue> out;
  for (const auto& sheet : wb.sheets())
    for (const auto& [pos, cell] : sheet.cells())
      if (!cell.computed.is_blank()) out.emplace(CellAddress{sheet.name(), pos.col, pos.row}, cell.computed);
  return out;
}

}  // namespace

TEST_CASE("parser honours precedence and associativity") {
  CHECK(shape("=A1+B2*2") == "(+ A1 (* B2 2))");
  CHECK(shape("=SUM(B2:B5)") == "(SUM B2:B5)");
  CHECK(shape("=IF(C2>=D2,1,0)") == "(IF (>= C2 D2) 1 0)");
  CHECK(shape("=-2^2") == "(neg (^ 2 2))");
  CHECK(shape("=2^3^2") == "(^ 2 (^ 3 2))");
  CHECK(shape("=1-2-3") == "(- (- 1 2) 3)");
  CHECK(shape("=1+2&3") == "(& (+ 1 2) 3)");
  CHECK(shape("=1&2=3") == "(= (& 1 2) 3)");
  CHECK(shape("=2*-3") == "(* 2 (neg 3))");
  CHECK(shape("= sum( Sales!A1:b2 , 'My Sheet'!C3 )") == "(SUM Sales!A1:B2 'My Sheet'!C3)");
  CHECK(shape("=\"a\"\"b\"&TRUE") == "(& \"a\"\"b\" TRUE)");
  CHECK(shape("=$A$1*.5e1") == "(* A1 5)");
  CHECK(shape("=NOW()") == "(NOW)");
}

TEST_CASE("parser errors report offset and expected tokens") {
  try {
    parse_formula("=SUM(");
    FAIL("expected syntax error");
  } catch (const FormulaSyntaxError& e) {
    CHECK(e.offset() == 5);
    CHECK(std::find(e.expected().begin(), e.expected().end(), "')'") != e.expected().end());
  }
  auto offset_of = [](std::string_view src) -> std::size_t {
    try {
      parse_formula(src);
    } catch (const FormulaSyntaxError& e) {
      return e.offset();
    }
    return std::string::npos;
  };
  CHECK(offset_of("A1+1") == 0);
  CHECK(offset_of("=") == 1);
  CHECK(offset_of("=1+") == 3);
  CHECK(offset_of("=A1:B2+1") == 1);  // bare range in scalar position
  CHECK(offset_of("=(1+2") == 5);
  CHECK(offset_of("=1 2") == 3);
  CHECK(offset_of("=foo") == 1);
  CHECK(offset_of("=\"abc") == 5);
  CHECK(offset_of("=SUM(A1,)") == 8);
}

TEST_CASE("references are static and conservative") {
  CHECK(locals(references(*parse_formula("=A1+A2"), "S")) == std::set<std::string>{"A1", "A2"});
  CHECK(locals(references(*parse_formula("=SUM(B2:B4)"), "S")) == std::set<std::string>{"B2", "B3", "B4"});
  CHECK(locals(references(*parse_formula("=IF(A1>0,B1,C1)"), "S")) == std::set<std::string>{"A1", "B1", "C1"});
  auto cross = references(*parse_formula("=Other!A1+A1"), "S");
  CHECK(cross.size() == 2);
  CHECK(cross.contains(CellAddress{"Other", 1, 1}));
}

TEST_CASE("dependency graph edges and cycle witnesses") {
  auto g = build_dep_graph(sheet_with({{"A3", "=A1+A2"}}));
  auto a1 = *g.find(at("A1")), a2 = *g.find(at("A2")), a3 = *g.find(at("A3"));
  CHECK(g.dependents(a1) == std::vector<DepGraph::NodeId>{a3});
  CHECK(g.dependents(a2) == std::vector<DepGraph::NodeId>{a3});
  CHECK(g.edge_count() == 2);
  CHECK(g.cycle_witnesses().empty());

  auto c = build_dep_graph(sheet_with({{"A1", "=B1"}, {"B1", "=A1"}, {"C1", "=A1+1"}, {"D1", "=D1"}}));
  std::set<std::string> witnesses;
  for (auto id : c.cycle_witnesses()) witnesses.insert(c.address(id).local());
  CHECK(witnesses == std::set<std::string>{"A1", "B1", "D1"});
  CHECK(c.blocked(*c.find(at("C1"))));
}

TEST_CASE("topological order is valid on random acyclic graphs") {
  testing::WorkbookGen gen(5);
  for (int trial = 0; trial < 100; ++trial) {
    Workbook wb("t");
    wb.add_sheet("S");
    // Acyclic by construction: each formula only references cells that
    // come earlier in a random permutation.
    std::vector<std::string> order;
    for (int c = 1; c <= 6; ++c)
      for (int r = 1; r <= 6; ++r) order.push_back(column_name(c) + std::to_string(r));
    std::shuffle(order.begin(), order.end(), gen.rng());
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i == 0 || gen.chance(0.3)) {
        wb.set_input(at(order[i]), std::to_string(gen.uniform(0, 9)));
        continue;
      }
      std::string f = "=" + order[static_cast<std::size_t>(gen.uniform(0, static_cast<int>(i) - 1))];
      for (int k = gen.uniform(0, 2); k > 0; --k)
        f += "+" + order[static_cast<std::size_t>(gen.uniform(0, static_cast<int>(i) - 1))];
      wb.set_input(at(order[i]), f);
    }
    auto g = build_dep_graph(wb);
    REQUIRE(g.cycle_witnesses().empty());
    REQUIRE(g.topo_order().size() == g.size());
    std::vector<std::size_t> pos(g.size());
    for (std::size_t i = 0; i < g.topo_order().size(); ++i) pos[g.topo_order()[i]] = i;
    for (DepGraph::NodeId p = 0; p < g.size(); ++p)
      for (auto d : g.dependents(p)) REQUIRE(pos[p] < pos[d]);
  }
}

TEST_CASE("evaluate_all on the reference examples") {
  auto wb = evaluate_all(sheet_with({{"A1", "2"}, {"A2", "3"}, {"A3", "=A1+A2"}}));
  CHECK(wb.value(at("A3")) == CellValue(5.0));

  // car model, number of sales, average price, total income
  auto sales = evaluate_all(sheet_with({{"A2", "Roadster"}, {"B2", "10"}, {"C2", "25000"}, {"D2", "=B2*C2"}}));
  CHECK(sales.value(at("D2")) == CellValue(250000.0));

  auto errs = evaluate_all(sheet_with({{"A1", "=1/0"}, {"A2", "=A1+1"}}));
  CHECK(errs.value(at("A1")) == CellValue(ErrorCode::Div0));
  CHECK(errs.value(at("A2")) == CellValue(ErrorCode::Div0));

  auto perf = evaluate_all(sheet_with({{"E2", "10"}, {"F2", "40"}, {"G2", "=E2/F2*100"}}));
  CHECK(perf.value(at("G2")) == CellValue(25.0));

  auto cyc = evaluate_all(sheet_with({{"A1", "=B1"}, {"B1", "=A1"}, {"C1", "=IF(TRUE,1,A1)"}, {"D1", "=5"}}));
  CHECK(cyc.value(at("A1")) == CellValue(ErrorCode::Cycle));
  CHECK(cyc.value(at("B1")) == CellValue(ErrorCode::Cycle));
  CHECK(cyc.value(at("C1")) == CellValue(ErrorCode::Cycle));
  CHECK(cyc.value(at("D1")) == CellValue(5.0));
}

TEST_CASE("operators and functions") {
  CHECK(eval_one("=-2^2") == CellValue(-4.0));
  CHECK(eval_one("=2^3^2") == CellValue(512.0));
  CHECK(eval_one("=1+2&3") == CellValue("33"));
  CHECK(eval_one("=\"abc\"=\"ABC\"") == CellValue(true));
  CHECK(eval_one("=1<\"a\"") == CellValue(true));
  CHECK(eval_one("=\"a\"<TRUE") == CellValue(true));
  CHECK(eval_one("=Z1=0") == CellValue(true));
  CHECK(eval_one("=Z1=\"\"") == CellValue(true));
  CHECK(eval_one("=\"x\"+1") == CellValue(ErrorCode::Value));
  CHECK(eval_one("=\"2\"*3") == CellValue(6.0));
  CHECK(eval_one("=TRUE+1") == CellValue(2.0));
  CHECK(eval_one("=0^-1") == CellValue(ErrorCode::Div0));
  CHECK(eval_one("=(-8)^0.5") == CellValue(ErrorCode::Value));
  CHECK(eval_one("=10^400") == CellValue(ErrorCode::Value));
  CHECK(eval_one("=1/0+FOO()") == CellValue(ErrorCode::Div0));
  CHECK(eval_one("=FOO()+1/0") == CellValue(ErrorCode::Name));
  CHECK(eval_one("=NoSuchSheet!A1") == CellValue(ErrorCode::Ref));
  CHECK(eval_one("=SUM(NoSuchSheet!A1:A2)") == CellValue(ErrorCode::Ref));

  CHECK(eval_one("=ROUND(2.675,2)") == CellValue(2.68));
  CHECK(eval_one("=ROUND(-2.5,0)") == CellValue(-3.0));
  CHECK(eval_one("=ROUND(1234.5,-2)") == CellValue(1200.0));
  CHECK(eval_one("=ROUND(0.4)") == CellValue(0.0));
  CHECK(eval_one("=ROUND(99.96,1)") == CellValue(100.0));
  CHECK(eval_one("=ROUND(4,-2)") == CellValue(0.0));
  CHECK(eval_one("=ABS(-3)") == CellValue(3.0));
  CHECK(eval_one("=CONCAT(\"a\",1,TRUE)") == CellValue("a1TRUE"));
  CHECK(eval_one("=IF(0,1)") == CellValue(false));
  CHECK(eval_one("=IF(\"maybe\",1,2)") == CellValue(ErrorCode::Value));
  CHECK(eval_one("=IF(1,2,1/0)") == CellValue(2.0));
  CHECK(eval_one("=ABS(1,2)") == CellValue(ErrorCode::Value));
  CHECK(eval_one("=ABS(A1:A2)") == CellValue(ErrorCode::Value));
  CHECK(eval_one("=sum(1,2)") == CellValue(3.0));

  auto wb = evaluate_all(sheet_with({{"A1", "4"},
                                     {"A2", ""},
                                     {"A3", "text"},
                                     {"A4", "TRUE"},
                                     {"A5", "2"},
                                     {"B1", "=SUM(A1:A5)"},
                                     {"B2", "=AVERAGE(A1:A5)"},
                                     {"B3", "=COUNT(A1:A5)"},
                                     {"B4", "=MIN(A1:A5)"},
                                     {"B5", "=MAX(A1:A5,10)"},
                                     {"B6", "=AVERAGE(C1:C3)"},
                                     {"B7", "=MIN(C1:C3)"},
                                     {"B8", "=CONCAT(A1:A5)"},
                                     {"C5", "=1/0"},
                                     {"C6", "=FOO()"},
                                     {"B9", "=SUM(C5:C6)"},
                                     {"B10", "=COUNT(C6,C5)"}}));
  CHECK(wb.value(at("B1")) == CellValue(6.0));
  CHECK(wb.value(at("B2")) == CellValue(3.0));
  CHECK(wb.value(at("B3")) == CellValue(2.0));
  CHECK(wb.value(at("B4")) == CellValue(2.0));
  CHECK(wb.value(at("B5")) == CellValue(10.0));
  CHECK(wb.value(at("B6")) == CellValue(ErrorCode::Div0));
  CHECK(wb.value(at("B7")) == CellValue(0.0));
  CHECK(wb.value(at("B8")) == CellValue("4textTRUE2"));
  CHECK(wb.value(at("B9")) == CellValue(ErrorCode::Div0));
  CHECK(wb.value(at("B10")) == CellValue(ErrorCode::Name));
}

TEST_CASE("recalculate touches only changed cells") {
  auto wb = evaluate_all(sheet_with({{"A1", "1"}, {"A2", "2"}, {"A3", "=A1+A2"}, {"B1", "7"}}));
  wb.set_input(at("A1"), "5");
  auto changes = recalculate(wb, {at("A1")});
  CHECK(changes.size() == 2);
  CHECK(changes.at(at("A1")).after == CellValue(5.0));
  CHECK(changes.at(at("A3")) == ValueChange{CellValue(3.0), CellValue(7.0)});

  wb.set_input(at("B1"), "8");
  auto single = recalculate(wb, {at("B1")});
  CHECK(single.size() == 1);

  wb.set_input(at("B1"), "8");
  CHECK(recalculate(wb, {at("B1")}).empty());

  wb.clear(at("A2"));
  auto cleared = recalculate(wb, {at("A2")});
  CHECK(cleared.at(at("A2")).after.is_blank());
  CHECK(wb.value(at("A3")) == CellValue(5.0));
  CHECK(wb.cell(at("A2")) == nullptr);

  // Breaking a cycle releases every cell that was downstream of it.
  auto cyc = evaluate_all(sheet_with({{"A1", "=B1"}, {"B1", "=A1+1"}, {"C1", "=B1*2"}}));
  cyc.set_input(at("A1"), "1");
  recalculate(cyc, {at("A1")});
  CHECK(cyc.value(at("C1")) == CellValue(4.0));
}

TEST_CASE("recalculate matches full evaluation on random edits") {
  testing::WorkbookGen gen(11);
  for (int trial = 0; trial < 200; ++trial) {
    auto wb = evaluate_all(gen.workbook(100));
    for (int edit = 0; edit < 5; ++edit) {
      auto addr = at(gen.random_cell());
      wb.set_input(addr, gen.input());
      recalculate(wb, {addr});
      auto full = evaluate_all(wb);
      REQUIRE(computed_map(wb) == computed_map(full));
    }
  }
}

TEST_CASE("evaluate_all agrees with the sweep oracle") {
  testing::WorkbookGen gen(21);
  for (int trial = 0; trial < 150; ++trial) {
    auto wb = gen.workbook(60, 0.6);
    REQUIRE(computed_map(evaluate_all(wb)) == sweep_oracle(wb));
  }
}

TEST_CASE("evaluation is pure and reads only referenced cells") {
  testing::WorkbookGen gen(33);
  for (int trial = 0; trial < 200; ++trial) {
    auto wb = gen.workbook(40, 0.4);
    auto once = evaluate_all(wb);
    REQUIRE(computed_map(once) == computed_map(evaluate_all(wb)));

    auto formula = "=" + gen.expression(3);
    auto ast = parse_formula(formula);
    auto refs = references(*ast, "S");
    auto before = evaluate(*ast->root, "S", once);
    // Perturb a cell outside the reference set; the result cannot move.
    auto victim = at(gen.random_cell());
    if (refs.contains(victim)) continue;
    auto perturbed = once;
    perturbed.set_input(victim, "12345");
    recalculate(perturbed, {victim});
    if (refs.contains(victim)) continue;
    bool depends_on_victim = false;
    for (const auto& r : refs) {
      if (perturbed.value(r) != once.value(r)) depends_on_victim = true;
    }
    if (depends_on_victim) continue;
    REQUIRE(evaluate(*ast->root, "S", perturbed) == before);
  }
}

TEST_CASE("adding a sheet falls back to full evaluation") {
  auto wb = evaluate_all(sheet_with({{"A1", "=Extra!A1+1"}}));
  CHECK(wb.value(at("A1")) == CellValue(ErrorCode::Ref));
  wb.add_sheet("Extra");
  auto changes = recalculate(wb, {});
  CHECK(changes.at(at("A1")).after == CellValue(1.0));
}
