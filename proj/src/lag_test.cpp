#include <doctest.h>

#include <random>

#include "lagsim/error.hpp"
#include "lagsim/lag.hpp"
#include "support/oracles.hpp"

using namespace lagsim;

namespace {

LagSystem system_of(const std::string& text, std::vector<std::string> extra = {}) {
  auto rules = parse_rule_file(text);
  return LagSystem::from_text(rules, alphabet_for_rules(rules, extra));
}

SymbolString str(const LagSystem& s, const std::string& text) { return parse_symbols(s.alphabet(), text); }

std::string text_of(const LagSystem& s, const std::deque<SymbolId>& d) {
  return join_symbols(s.alphabet(), SymbolString(d.begin(), d.end()));
}

}  // namespace

TEST_CASE("single step applies the rule and deletes one symbol") {
  auto sys = system_of("A B -> C", {"Q"});
  auto r = step(sys, {std::deque<SymbolId>{sys.alphabet().at("A"), sys.alphabet().at("B"), sys.alphabet().at("Q")}, 0});
  REQUIRE(std::holds_alternative<LagConfiguration>(r));
  CHECK(text_of(sys, std::get<LagConfiguration>(r).string) == "B Q C");
  CHECK(std::get<LagConfiguration>(r).step_index == 1);
}

TEST_CASE("two-output rule") {
  auto sys = system_of("A B -> C D");
  auto in = str(sys, "A B");
  auto r = step(sys, {std::deque<SymbolId>(in.begin(), in.end()), 0});
  REQUIRE(std::holds_alternative<LagConfiguration>(r));
  CHECK(text_of(sys, std::get<LagConfiguration>(r).string) == "B C D");
}

TEST_CASE("prefix matching is positional") {
  auto sys = system_of("A B -> C", {"Q"});
  auto in = str(sys, "Q A B");
  auto r = step(sys, {std::deque<SymbolId>(in.begin(), in.end()), 0});
  REQUIRE(std::holds_alternative<HaltReason>(r));
  CHECK(std::get<HaltReason>(r) == HaltReason::NoRuleMatch);
}

TEST_CASE("one-output rules keep the length constant") {
  // With deletion 1 a single-symbol production never shortens the string,
  // so this system cycles on "B B B" until the budget runs out.
  auto sys = system_of("A B -> B\nB B -> B");
  auto t = run(sys, str(sys, "A B B"), 10);
  REQUIRE(t.strings.size() == 11);
  CHECK(join_symbols(sys.alphabet(), t.strings[0]) == "A B B");
  for (std::size_t i = 1; i < t.strings.size(); ++i) CHECK(join_symbols(sys.alphabet(), t.strings[i]) == "B B B");
  CHECK(t.halt == HaltReason::StepBudget);

  oracle::NaiveLag naive{{{{0, 1}, {1}}, {{1, 1}, {1}}}};
  auto expect = naive.run({0, 1, 1}, 10);
  REQUIRE(expect.size() == t.strings.size());
  for (std::size_t i = 0; i < expect.size(); ++i)
    CHECK(SymbolString(expect[i].begin(), expect[i].end()) == t.strings[i]);
}

TEST_CASE("strings shorter than the lag halt") {
  auto sys = system_of("A B -> B");
  auto t = run(sys, str(sys, "B"), 10);
  CHECK(t.strings.size() == 1);
  CHECK(t.halt == HaltReason::StringTooShort);
  auto e = run(sys, SymbolString{}, 10);
  CHECK(e.halt == HaltReason::StringTooShort);
}

TEST_CASE("zero budget gives a one-string trace") {
  auto sys = system_of("A B -> B");
  auto t = run(sys, str(sys, "A B"), 0);
  CHECK(t.strings.size() == 1);
  CHECK(t.halt == HaltReason::StepBudget);
}

TEST_CASE("rule file syntax errors carry line numbers") {
  try {
    parse_rule_file("A B -> C\n# comment\nA B C\n");
    FAIL("expected SyntaxError");
  } catch (const SyntaxError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_rule_file("A B ->"), SyntaxError);
  CHECK(parse_rule_file("# only comments\n\n").empty());
}

TEST_CASE("validation reports duplicates, rhs length and foreign symbols") {
  auto dup = parse_rule_file("A B -> C\nA B -> D\n");
  auto r = validate(dup, alphabet_for_rules(dup));
  REQUIRE(r.size() == 1);
  CHECK(r[0].kind == "duplicate_lhs");

  auto ok = parse_rule_file("A B -> C\nB C -> A\nC A -> A B\n");
  CHECK(validate(ok, alphabet_for_rules(ok)).empty());

  auto long_rhs = parse_rule_file("A B -> C D E\n");
  auto r2 = validate(long_rhs, alphabet_for_rules(long_rhs));
  REQUIRE(r2.size() == 1);
  CHECK(r2[0].kind == "rhs_length");

  Alphabet small({"A", "B", "<h>"}, "<h>");
  auto foreign = parse_rule_file("A B -> Z\n");
  auto r3 = validate(foreign, small);
  REQUIRE(r3.size() == 1);
  CHECK(r3[0].kind == "foreign_symbol");

  CHECK_THROWS_AS(LagSystem::from_text(dup, alphabet_for_rules(dup)), Error);
}

TEST_CASE("rules may not use the halt symbol") {
  auto rules = parse_rule_file("A <h> -> A\n");
  CHECK_FALSE(validate(rules, alphabet_for_rules(rules)).empty());
}

TEST_CASE("reading a foreign id throws") {
  auto sys = system_of("A B -> B");
  std::deque<SymbolId> s{0, 99};
  CHECK_THROWS_AS(step_in_place(sys, s), ForeignSymbol);
}

TEST_CASE("rule file round trip and sorted enumeration") {
  auto sys = system_of("B A -> A\nA B -> B A\nA A -> B\n");
  auto again = system_of(sys.to_rule_file());
  CHECK(again.rules().size() == 3);
  auto sorted = sys.sorted_rules();
  REQUIRE(sorted.size() == 3);
  CHECK(sorted[0]->lhs <= sorted[1]->lhs);
  CHECK(sorted[1]->lhs <= sorted[2]->lhs);
  CHECK(sys.two_output_rule_count() == 1);
}

TEST_CASE("random systems agree with the naive interpreter and obey the step invariants") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    oracle::NaiveLag naive;
    const int n = 2 + trial % 6;
    auto sys = oracle::random_system(rng, n, 0.8, &naive);
    auto in = oracle::random_string(rng, n, 8);
    const SymbolString input(in.begin(), in.end());
    auto t = run(sys, input, 60);
    oracle::NaiveLag::End end{};
    auto expect = naive.run(in, 60, &end);
    REQUIRE(t.strings.size() == expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i)
      CHECK(t.strings[i] == SymbolString(expect[i].begin(), expect[i].end()));
    for (std::size_t i = 1; i < t.strings.size(); ++i) {
      const auto& prev = t.strings[i - 1];
      const auto& next = t.strings[i];
      const auto delta = static_cast<long>(next.size()) - static_cast<long>(prev.size());
      CHECK((delta == 0 || delta == 1));
      CHECK(std::equal(prev.begin() + 1, prev.end(), next.begin()));
    }
    auto again = run(sys, input, 60);
    CHECK(again.strings == t.strings);
    CHECK(again.halt == t.halt);
  }
}
