#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "lagsim/backend_config.hpp"
#include "lagsim/backends.hpp"
#include "lagsim/compiler.hpp"
#include "lagsim/turing.hpp"
#include "lagsim/verification.hpp"

using namespace lagsim;

namespace {

std::string read_fixture(const std::string& name) {
  std::ifstream in(std::string(LAGSIM_FIXTURE_DIR) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct World {
  explicit World(const std::string& fixture) : compiled(compile(parse_tm(read_fixture(fixture)))) {
    system = std::make_shared<LagSystem>(compiled.system());
    codebook = std::make_shared<Codebook>(
        build_pair_codebook(system->alphabet(), default_token_alphabet(system->alphabet().size())));
  }
  CompiledLag compiled;
  std::shared_ptr<LagSystem> system;
  std::shared_ptr<Codebook> codebook;
};

// Random checkpoint strings of the compiled machine.
std::vector<SymbolString> checkpoints(const CompiledLag& c, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& tm = c.machine();
  std::vector<SymbolString> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> tape(1 + rng() % 6);
    for (auto& x : tape) x = static_cast<int>(rng() % tm.symbol_count());
    out.push_back(c.encode_config(initial_configuration(tm, tape, rng() % tape.size())));
  }
  return out;
}

}  // namespace

TEST_CASE("rule table passes every rule of every compiled fixture") {
  for (auto name : {"one_transition.tm", "binary_increment.tm", "parity.tm", "busy_beaver3.tm"}) {
    World w(name);
    RuleTableBackend<Token> model(w.system, w.codebook);
    auto rep = verify_rules<Token>(model, *w.codebook, {}, *w.system, 2);
    CAPTURE(name);
    CHECK(rep.passed == w.system->rules().size());
    CHECK(rep.all_passed());
    CHECK(rep.first_failure() == nullptr);
  }
}

TEST_CASE("one corrupted rule gives exactly one named failure") {
  World w("binary_increment.tm");
  const auto& al = w.system->alphabet();
  const auto* victim = w.system->sorted_rules()[7];
  std::string spec = al.label(victim->lhs[0]) + " " + al.label(victim->lhs[1]) + " -> " +
                     al.label(victim->rhs[0] == 0 ? 1 : 0);
  auto bad = std::make_shared<LagSystem>(corrupt_rule(*w.system, spec));
  RuleTableBackend<Token> model(bad, w.codebook);
  auto rep = verify_rules<Token>(model, *w.codebook, {}, *w.system);
  CHECK(rep.failed == 1);
  CHECK(rep.passed == rep.total() - 1);
  REQUIRE(rep.first_failure());
  CHECK(rep.first_failure()->rule == *victim);
  CHECK(rep.first_failure()->failure == FailureKind::WrongSymbol);
  CHECK(!rep.first_failure()->context.empty());

  auto j = nlohmann::json::parse(report_to_json(rep, al, false));
  CHECK(j["verdicts"].size() == 1);
  CHECK(j["summary"]["failed"] == 1);
}

TEST_CASE("report fingerprint ignores the timestamp only") {
  World w("parity.tm");
  RuleTableBackend<Token> model(w.system, w.codebook);
  auto a = verify_rules<Token>(model, *w.codebook, {}, *w.system);
  auto b = verify_rules<Token>(model, *w.codebook, {}, *w.system, 3);
  b.timestamp = "1999-01-01T00:00:00Z";
  const auto& al = w.system->alphabet();
  CHECK(report_fingerprint(a, al) == report_fingerprint(b, al));
  CHECK(report_to_json(a, al) != report_to_json(b, al));
  auto j = nlohmann::json::parse(report_to_json(a, al, true, {{"config_hash", "abc"}}));
  CHECK(j["config_hash"] == "abc");
  CHECK(j["metadata"]["timestamp"].is_string());
  CHECK(j["verdicts"].size() == a.total());
}

TEST_CASE("an invalid codebook aborts verification") {
  World w("one_transition.tm");
  auto words = w.codebook->token_words();
  words[1] = words[0];
  Codebook clash = Codebook::tokens(words, w.codebook->halt());
  RuleTableBackend<Token> model(w.system, w.codebook);
  CHECK_THROWS_AS(verify_rules<Token>(model, clash, {}, *w.system), InvalidCodebook);
}

TEST_CASE("verified backend agrees with the engine on random inputs") {
  World w("busy_beaver3.tm");
  RuleTableBackend<Token> model(w.system, w.codebook);
  for (const auto& in : checkpoints(w.compiled, 20, 1)) {
    auto rep = cosimulate<Token>(model, *w.codebook, {}, *w.system, in, 1000);
    CHECK(rep.agreed());
  }
}

TEST_CASE("corrupted backend diverges exactly at the rule's first use") {
  World w("busy_beaver3.tm");
  const auto& al = w.system->alphabet();
  const auto& tm = w.compiled.machine();
  auto input = w.compiled.encode_config(initial_configuration(tm, {}, 0));
  auto ref = run(*w.system, input, 2000);
  // Corrupt the rule applied at step 40 and find where it is first used.
  const auto& at40 = ref.strings[40];
  const auto* victim = w.system->match(at40.data());
  REQUIRE(victim);
  std::size_t first_use = 0;
  while (!(ref.strings[first_use][0] == victim->lhs[0] && ref.strings[first_use][1] == victim->lhs[1])) ++first_use;
  std::string spec = al.label(victim->lhs[0]) + " " + al.label(victim->lhs[1]) + " -> " + al.label(victim->lhs[0]) +
                     " " + al.label(victim->lhs[1]);
  auto bad = std::make_shared<LagSystem>(corrupt_rule(*w.system, spec));
  RuleTableBackend<Token> model(bad, w.codebook);
  auto rep = cosimulate<Token>(model, *w.codebook, {}, *w.system, input, 2000);
  REQUIRE(rep.divergence_step);
  CHECK(*rep.divergence_step == first_use + 1);
  CHECK(rep.expected != rep.observed);
}

TEST_CASE("zero steps is trivial agreement") {
  World w("parity.tm");
  RuleTableBackend<Token> model(w.system, w.codebook);
  auto rep = cosimulate<Token>(model, *w.codebook, {}, *w.system, checkpoints(w.compiled, 1, 2)[0], 0);
  CHECK(rep.agreed());
  CHECK(rep.steps_compared == 0);
}

TEST_CASE("halting outcomes of the engine end co-simulation") {
  auto rules = parse_rule_file("A B -> C");
  auto sys = std::make_shared<LagSystem>(LagSystem::from_text(rules, alphabet_for_rules(rules)));
  auto book = std::make_shared<Codebook>(build_pair_codebook(sys->alphabet(), default_token_alphabet(4)));
  RuleTableBackend<Token> model(sys, book);
  auto rep = cosimulate<Token>(model, *book, {}, *sys, parse_symbols(sys->alphabet(), "A B"), 10);
  CHECK(rep.agreed());
  CHECK(rep.lag_halt == HaltReason::NoRuleMatch);
  CHECK(rep.steps_compared == 1);
  rep = cosimulate<Token>(model, *book, {}, *sys, parse_symbols(sys->alphabet(), "A"), 10);
  CHECK(rep.agreed());
  CHECK(rep.lag_halt == HaltReason::StringTooShort);
  CHECK(rep.steps_compared == 0);
}

TEST_CASE("end-to-end: machine, Lag system and rule table agree") {
  World w("binary_increment.tm");
  RuleTableBackend<Token> model(w.system, w.codebook);
  const auto& tm = w.compiled.machine();
  std::vector<int> tape{*tm.find_symbol("1"), *tm.find_symbol("0"), *tm.find_symbol("1"), *tm.find_symbol("1")};
  auto start = initial_configuration(tm, tape, 3);

  SUBCASE("budget beyond the halting time") {
    auto rep = end_to_end_tm_check<Token>(w.compiled, model, *w.codebook, {}, start, 50);
    CHECK(rep.pass);
    CHECK(rep.failed_stage.empty());
    CHECK(rep.tm_halted);
    CHECK(rep.lag_halted);
    CHECK(rep.tm_steps_checked == 3);
  }
  SUBCASE("budget inside the run") {
    auto rep = end_to_end_tm_check<Token>(w.compiled, model, *w.codebook, {}, start, 2);
    CHECK(rep.pass);
    CHECK(!rep.tm_halted);
    CHECK(rep.tm_steps_checked == 2);
  }
  SUBCASE("a corrupted model is caught at the verify stage") {
    const auto* r = w.system->sorted_rules()[0];
    const auto& al = w.system->alphabet();
    auto bad = std::make_shared<LagSystem>(
        corrupt_rule(*w.system, al.label(r->lhs[0]) + " " + al.label(r->lhs[1]) + " -> " + al.label(r->lhs[0])));
    RuleTableBackend<Token> wrong(bad, w.codebook);
    auto rep = end_to_end_tm_check<Token>(w.compiled, wrong, *w.codebook, {}, start, 50);
    CHECK(!rep.pass);
    CHECK(rep.failed_stage == "verify");
  }
}

TEST_CASE("end-to-end on the busy beaver") {
  World w("busy_beaver3.tm");
  RuleTableBackend<Token> model(w.system, w.codebook);
  auto start = initial_configuration(w.compiled.machine(), {}, 0);
  auto rep = end_to_end_tm_check<Token>(w.compiled, model, *w.codebook, {}, start, 100);
  CHECK(rep.pass);
  CHECK(rep.tm_steps_checked == 13);
  CHECK(rep.lag_halted);
}
