#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "lagsim/backend_config.hpp"
#include "lagsim/compiler.hpp"
#include "lagsim/config.hpp"
#include "lagsim/error.hpp"
#include "lagsim/hashing.hpp"
#include "lagsim/trainer.hpp"
#include "lagsim/verification.hpp"

using namespace lagsim;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  TempDir() : path(fs::temp_directory_path() / ("lagsim_config_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path path;
};

LagSystem small_system() {
  auto rules = parse_rule_file("A B -> C\nB C -> A B\nC A -> B");
  return LagSystem::from_text(rules, alphabet_for_rules(rules));
}

}  // namespace

TEST_CASE("TOML subset: sections, scalars, arrays, comments") {
  auto t = ConfigTable::parse(R"(
top = 1
[train]
step_size = 1e-4   # trailing comment
max_iterations = 20_000
name = "a # not a comment"
escaped = "x\"y"
flag = true
dims = [2, 4, 64]
archs = ["rnn", "attention"]
)");
  CHECK(t.get_number("top") == 1);
  CHECK(t.get_number("train.step_size") == doctest::Approx(1e-4));
  CHECK(t.get_number("train.max_iterations") == 20000);
  CHECK(t.get_string("train.name") == "a # not a comment");
  CHECK(t.get_string("train.escaped") == "x\"y");
  CHECK(t.get_bool("train.flag"));
  CHECK(t.get_numbers("train.dims") == std::vector<double>{2, 4, 64});
  CHECK(t.get_strings("train.archs") == std::vector<std::string>{"rnn", "attention"});
  CHECK(t.get_number("train.missing", 3.0) == 3.0);
  CHECK(!t.has("missing"));
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(ConfigTable::parse("[broken"), ConfigError);
  CHECK_THROWS_AS(ConfigTable::parse("novalue"), ConfigError);
  CHECK_THROWS_AS(ConfigTable::parse("k = \"open"), ConfigError);
  CHECK_THROWS_AS(ConfigTable::parse("k = [1, 2"), ConfigError);
  CHECK_THROWS_AS(ConfigTable::parse("k = bogus"), ConfigError);
  auto t = ConfigTable::parse("k = \"s\"\nn = 2");
  CHECK_THROWS_AS(t.get_number("k"), ConfigError);
  CHECK_THROWS_AS(t.get_string("n"), ConfigError);
  CHECK_THROWS_AS(t.get_string("absent"), ConfigError);
}

TEST_CASE("atomic writes replace the whole file") {
  TempDir dir;
  auto p = (dir.path / "out.txt").string();
  write_file_atomic(p, "first");
  write_file_atomic(p, "second");
  CHECK(read_file(p) == "second");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path)) ++files;
  CHECK(files == 1);
  CHECK_THROWS_AS(read_file((dir.path / "absent").string()), Error);
}

TEST_CASE("SHA-256 known answers") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("rule files load with the compiler's sidecar alphabet") {
  TempDir dir;
  auto compiled = compile(parse_tm("states: a h\nalphabet: 0 1\nblank: 0\nstart: a\nhalt: h\na 0 -> 1 R h\n"));
  const auto rules_path = dir.path / "m.lag";
  write_file_atomic(rules_path.string(), compiled.system().to_rule_file());
  write_file_atomic(rules_path.string() + ".json", compiled.sidecar_json());
  auto loaded = load_lag_system(rules_path);
  CHECK(loaded.alphabet() == compiled.alphabet());
  CHECK(loaded.rules() == compiled.system().rules());
  fs::remove(rules_path.string() + ".json");
  CHECK(load_lag_system(rules_path).rules().size() == compiled.system().rules().size());
  CHECK_THROWS_AS(load_lag_system(dir.path / "missing.lag"), Error);
}

TEST_CASE("rule corruption") {
  auto sys = small_system();
  auto bad = corrupt_rule(sys, "A B -> B");
  CHECK(bad.rules().size() == sys.rules().size());
  const auto& al = sys.alphabet();
  SymbolId ab[] = {al.at("A"), al.at("B")};
  CHECK(bad.match(ab)->rhs == SymbolString{al.at("B")});
  CHECK_THROWS_AS(corrupt_rule(sys, "A B -> C"), ConfigError);
  CHECK_THROWS_AS(corrupt_rule(sys, "C C -> A"), ConfigError);
  CHECK_THROWS_AS(corrupt_rule(sys, "A B -> C\nB C -> A"), ConfigError);
}

TEST_CASE("default token alphabet covers the pair codebook") {
  for (std::size_t n : {2u, 5u, 250u}) {
    auto ta = default_token_alphabet(n);
    CHECK(ta.tokens.size() * ta.tokens.size() >= n);
    ta.check();
  }
}

TEST_CASE("backend tables build working backends") {
  TempDir dir;
  auto sys = small_system();

  SUBCASE("rule table with a system prompt") {
    auto setup = make_backend(ConfigTable::parse("[backend]\nkind = \"rule-table\"\nsystem_prompt = \"p q\"\n"), sys,
                              dir.path);
    auto& s = std::get<TokenSetup>(setup);
    CHECK(s.prompt == std::vector<Token>{"p", "q"});
    CHECK(verify_rules<Token>(*s.backend, *s.codebook, s.prompt, sys).all_passed());
  }
  SUBCASE("explicit tokens and a corrupted rule") {
    auto setup = make_backend(
        ConfigTable::parse("[backend]\nkind = \"rule-table\"\ntokens = [\"x\", \"y\", \"z\"]\ncorrupt = \"C A -> A\"\n"),
        sys, dir.path);
    auto& s = std::get<TokenSetup>(setup);
    CHECK(s.codebook->token_word(0) == std::vector<Token>{"x", "x"});
    CHECK(verify_rules<Token>(*s.backend, *s.codebook, s.prompt, sys).failed == 1);
  }
  SUBCASE("vector nets need a codebook of matching dimension") {
    Eigen::MatrixXd table = Eigen::MatrixXd::Identity(4, 4);
    write_file_atomic((dir.path / "cb.json").string(), codebook_to_json(Codebook::vectors(table, 3), sys.alphabet()));
    auto setup = make_backend(
        ConfigTable::parse("[backend]\nkind = \"rnn\"\nd = 4\nseed = 2\ncodebook = \"cb.json\"\n"), sys, dir.path);
    auto& s = std::get<VectorSetup>(setup);
    CHECK(s.net->dimension() == 4);
    CHECK(s.net->parameter_hash() == sweep_backend("rnn", 4, 2)->parameter_hash());
    CHECK_THROWS_AS(make_backend(ConfigTable::parse("[backend]\nkind = \"attention\"\nd = 8\ncodebook = \"cb.json\"\n"),
                                 sys, dir.path),
                    DimensionMismatch);
    CHECK_THROWS_AS(make_backend(ConfigTable::parse("[backend]\nkind = \"rnn\"\nd = 4\n"), sys, dir.path), ConfigError);
  }
  SUBCASE("unknown kind") {
    CHECK_THROWS_AS(make_backend(ConfigTable::parse("[backend]\nkind = \"gpt\"\n"), sys, dir.path), ConfigError);
  }
}
