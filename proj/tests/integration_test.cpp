#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <unistd.h>

#include "lagsim/backend_config.hpp"
#include "lagsim/backends.hpp"
#include "lagsim/compiler.hpp"
#include "lagsim/remote.hpp"
#include "lagsim/trainer.hpp"
#include "lagsim/turing.hpp"
#include "lagsim/verification.hpp"
#include "support/mock_chat_server.hpp"
#include "support/oracles.hpp"

using namespace lagsim;
namespace fs = std::filesystem;

namespace {

std::string read_fixture(const std::string& name) {
  std::ifstream in(std::string(LAGSIM_FIXTURE_DIR) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kFixtures[] = {"one_transition.tm", "binary_increment.tm", "parity.tm", "busy_beaver3.tm"};

TMConfiguration random_start(const TuringMachine& tm, std::mt19937_64& rng) {
  std::vector<int> tape(1 + rng() % 5);
  for (auto& c : tape) c = static_cast<int>(rng() % tm.symbol_count());
  return initial_configuration(tm, tape, rng() % tape.size());
}

}  // namespace

TEST_CASE("every fixture: machine = Lag = rule-table model on random tapes") {
  std::mt19937_64 rng(1);
  for (auto name : kFixtures) {
    auto compiled = compile(parse_tm(read_fixture(name)));
    auto sys = std::make_shared<LagSystem>(compiled.system());
    auto book = std::make_shared<Codebook>(
        build_pair_codebook(sys->alphabet(), default_token_alphabet(sys->alphabet().size())));
    RuleTableBackend<Token> model(sys, book);
    for (int trial = 0; trial < 5; ++trial) {
      auto rep = end_to_end_tm_check<Token>(compiled, model, *book, {}, random_start(compiled.machine(), rng), 30);
      CAPTURE(name);
      CAPTURE(rep.failed_stage);
      CAPTURE(rep.detail);
      CHECK(rep.pass);
    }
  }
}

TEST_CASE("simulation equals the engine on 50 random inputs up to 1000 steps") {
  auto compiled = compile(parse_tm(read_fixture("busy_beaver3.tm")));
  auto sys = std::make_shared<LagSystem>(compiled.system());
  auto book = std::make_shared<Codebook>(
      build_pair_codebook(sys->alphabet(), default_token_alphabet(sys->alphabet().size())));
  RuleTableBackend<Token> model(sys, book);
  REQUIRE(verify_rules<Token>(model, *book, {}, *sys).all_passed());
  std::mt19937_64 rng(2);
  std::size_t long_runs = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t budget = 1 + rng() % 1000;
    // Mix well-formed checkpoints with arbitrary symbol strings.
    SymbolString input;
    if (trial % 2 == 0) {
      input = compiled.encode_config(random_start(compiled.machine(), rng));
    } else {
      input.resize(2 + rng() % 10);
      for (auto& s : input) s = static_cast<SymbolId>(rng() % (sys->alphabet().size() - 1));
    }
    auto rep = cosimulate<Token>(model, *book, {}, *sys, input, budget);
    CHECK(rep.agreed());
    if (rep.steps_compared > 100) ++long_runs;
  }
  CHECK(long_runs > 0);
}

TEST_CASE("remote pipeline through a mock provider, with a system prompt and cache") {
  auto compiled = compile(parse_tm(read_fixture("binary_increment.tm")));
  auto sys = std::make_shared<LagSystem>(compiled.system());
  auto book = std::make_shared<Codebook>(
      build_pair_codebook(sys->alphabet(), default_token_alphabet(sys->alphabet().size())));
  mock::ChatServer server(sys, book, "follow the rules");
  const fs::path cache = fs::temp_directory_path() / ("lagsim_integration_" + std::to_string(::getpid()));
  fs::remove_all(cache);
  fs::create_directories(cache);

  RemoteConfig cfg;
  cfg.endpoint = server.endpoint();
  cfg.model = "mock";
  cfg.system_prompt = {"follow", "the", "rules"};
  cfg.cache_dir = cache;
  cfg.retry.backoff = std::chrono::milliseconds(1);

  const auto& tm = compiled.machine();
  std::vector<int> tape{*tm.find_symbol("1"), *tm.find_symbol("1")};
  auto start = initial_configuration(tm, tape, 1);
  std::string first;
  {
    RemoteChatBackend remote(cfg);
    auto rep = end_to_end_tm_check<Token>(compiled, remote, *book, cfg.system_prompt, start, 20);
    CHECK(rep.pass);
    CHECK(rep.tm_halted);
    first = report_fingerprint(*rep.verification, sys->alphabet());
  }
  const int served = server.requests;
  {
    RemoteChatBackend remote(cfg);
    auto rep = verify_rules<Token>(remote, *book, cfg.system_prompt, *sys);
    CHECK(remote.network_requests() == 0);
    CHECK(report_fingerprint(rep, sys->alphabet()) == first);
  }
  CHECK(server.requests == served);

  // A wrong system prompt makes every rule fail without crashing.
  cfg.system_prompt = {"something", "else"};
  cfg.cache_dir.clear();
  RemoteChatBackend wrong(cfg);
  auto rep = verify_rules<Token>(wrong, *book, cfg.system_prompt, *sys);
  CHECK(rep.failed == rep.total());
  CHECK(rep.verdicts[0].failure == FailureKind::ParseFailure);
  fs::remove_all(cache);
}

TEST_CASE("trained attention codebook drives the machine end to end") {
  auto compiled = compile(parse_tm(read_fixture("one_transition.tm")));
  const auto& sys = compiled.system();
  std::shared_ptr<const SequenceNet> net = sweep_backend("attention", 64, 1);
  TrainConfig cfg;
  cfg.seed = 1;
  cfg.max_iterations = 2000;
  auto res = train_codebook(*net, sys, cfg);
  REQUIRE(res.success);
  auto book = std::make_shared<const Codebook>(*res.codebook);
  NetBackend model(net, book);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    auto rep = end_to_end_tm_check<Eigen::VectorXd>(compiled, model, *book, {}, random_start(compiled.machine(), rng),
                                                    10);
    CAPTURE(rep.failed_stage);
    CAPTURE(rep.detail);
    CHECK(rep.pass);
  }
  CHECK(net->parameter_hash() == res.backend_hash_before);
}

TEST_CASE("verification is independent of the worker count") {
  auto compiled = compile(parse_tm(read_fixture("parity.tm")));
  auto sys = std::make_shared<LagSystem>(compiled.system());
  auto book = std::make_shared<Codebook>(
      build_pair_codebook(sys->alphabet(), default_token_alphabet(sys->alphabet().size())));
  RuleTableBackend<Token> model(sys, book);
  auto one = verify_rules<Token>(model, *book, {}, *sys, 1);
  auto four = verify_rules<Token>(model, *book, {}, *sys, 4);
  CHECK(report_fingerprint(one, sys->alphabet()) == report_fingerprint(four, sys->alphabet()));
}
