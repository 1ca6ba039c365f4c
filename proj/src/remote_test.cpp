#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "json.hpp"
#include "lagsim/backends.hpp"
#include "lagsim/config.hpp"
#include "lagsim/hashing.hpp"
#include "lagsim/remote.hpp"
#include "lagsim/verification.hpp"
#include "support/mock_chat_server.hpp"

using namespace lagsim;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  Fixture() {
    auto rules = parse_rule_file("A B -> C\nB C -> A B\nC A -> B\nA A -> C C\nB B -> A");
    system = std::make_shared<LagSystem>(LagSystem::from_text(rules, alphabet_for_rules(rules)));
    TokenAlphabet ta{{"ka", "kb", "kc"}, ""};
    codebook = std::make_shared<Codebook>(build_pair_codebook(system->alphabet(), ta));
    cache = fs::temp_directory_path() / ("lagsim_remote_" + std::to_string(::getpid()) + "_" +
                                         std::to_string(counter++));
    fs::remove_all(cache);
    fs::create_directories(cache);
  }
  ~Fixture() { fs::remove_all(cache); }

  RemoteConfig config(const mock::ChatServer& server) const {
    RemoteConfig c;
    c.endpoint = server.endpoint();
    c.model = "mock";
    c.seed = 7;
    c.cache_dir = cache;
    c.retry.backoff = std::chrono::milliseconds(1);
    c.timeout = std::chrono::seconds(5);
    return c;
  }

  std::shared_ptr<LagSystem> system;
  std::shared_ptr<Codebook> codebook;
  fs::path cache;
  static inline int counter = 0;
};

std::vector<Token> query(const Fixture& f, const char* a, const char* b, std::vector<Token> prompt = {}) {
  for (const char* s : {a, b}) UnitCodec<Token>::append(*f.codebook, f.system->alphabet().at(s), prompt);
  return prompt;
}

}  // namespace

TEST_CASE("request JSON carries deterministic decoding parameters") {
  Fixture f;
  RemoteConfig c;
  c.endpoint = "http://127.0.0.1:1/v1/chat/completions";
  c.model = "m";
  c.seed = 42;
  c.max_tokens = 9;
  c.system_prompt = {"be", "exact"};
  RemoteChatBackend backend(c);
  auto ctx = query(f, "A", "B", c.system_prompt);
  auto j = nlohmann::json::parse(backend.request_json(ctx));
  CHECK(j["model"] == "m");
  CHECK(j["temperature"] == 0);
  CHECK(j["seed"] == 42);
  CHECK(j["max_tokens"] == 9);
  CHECK(j["messages"][0]["role"] == "system");
  CHECK(j["messages"][0]["content"] == "be exact");
  CHECK(j["messages"][1]["role"] == "user");
  CHECK(backend.request_json(ctx) == backend.request_json(ctx));
  std::vector<Token> no_prompt = query(f, "A", "B");
  CHECK_THROWS_AS(backend.request_json(no_prompt), Error);
}

TEST_CASE("mock-backed remote answers exactly like the rule table") {
  Fixture f;
  mock::ChatServer server(f.system, f.codebook);
  RemoteChatBackend remote(f.config(server));
  RuleTableBackend<Token> table(f.system, f.codebook);
  auto a = verify_rules<Token>(remote, *f.codebook, {}, *f.system);
  auto b = verify_rules<Token>(table, *f.codebook, {}, *f.system);
  CHECK(a.all_passed());
  CHECK(a.total() == f.system->rules().size());
  for (std::size_t i = 0; i < a.total(); ++i) CHECK(a.verdicts[i].observed == b.verdicts[i].observed);
}

TEST_CASE("second identical run is served from cache") {
  Fixture f;
  mock::ChatServer server(f.system, f.codebook);
  std::string first, second;
  {
    RemoteChatBackend remote(f.config(server));
    first = report_fingerprint(verify_rules<Token>(remote, *f.codebook, {}, *f.system), f.system->alphabet());
    CHECK(remote.network_requests() == f.system->rules().size());
  }
  const int served = server.requests;
  {
    RemoteChatBackend remote(f.config(server));
    second = report_fingerprint(verify_rules<Token>(remote, *f.codebook, {}, *f.system), f.system->alphabet());
    CHECK(remote.network_requests() == 0);
    CHECK(remote.cache_hits() == f.system->rules().size());
  }
  CHECK(server.requests == served);
  CHECK(first == second);

  // Cache files are the canonical request and the raw response, by hash.
  std::size_t requests = 0;
  for (const auto& e : fs::directory_iterator(f.cache)) {
    const auto name = e.path().filename().string();
    if (name.ends_with(".request.json")) {
      ++requests;
      CHECK(sha256_hex(read_file(e.path().string())) == name.substr(0, name.find('.')));
      CHECK(fs::exists(f.cache / (name.substr(0, name.find('.')) + ".response.json")));
    }
  }
  CHECK(requests == f.system->rules().size());
}

TEST_CASE("transient server errors are retried") {
  Fixture f;
  mock::ChatServer server(f.system, f.codebook);
  server.fail_remaining = 2;
  RemoteChatBackend remote(f.config(server));
  std::vector<std::string> log;
  remote.set_logger([&](const std::string& line) { log.push_back(line); });
  auto reply = remote.complete(query(f, "A", "B"));
  CHECK(remote.last_attempts() == 3);
  CHECK(server.requests == 3);
  REQUIRE(log.size() == 3);
  CHECK(log[0].find("attempt 1 failed (HTTP 500)") != std::string::npos);
  CHECK(log[2] == "remote: succeeded after 3 attempts");
  CHECK(!reply.empty());

  SUBCASE("rate limiting is retried too") {
    server.fail_status = 429;
    server.fail_remaining = 1;
    remote.complete(query(f, "B", "C"));
    CHECK(remote.last_attempts() == 2);
  }
}

TEST_CASE("retries are bounded") {
  Fixture f;
  mock::ChatServer server(f.system, f.codebook);
  server.fail_remaining = 100;
  auto cfg = f.config(server);
  cfg.retry.max_attempts = 3;
  RemoteChatBackend remote(cfg);
  remote.set_logger([](const std::string&) {});
  CHECK_THROWS_AS(remote.complete(query(f, "A", "B")), TransportError);
  CHECK(server.requests == 3);
  // Through the harness this is a Transport verdict, not a crash.
  auto rep = verify_rules<Token>(remote, *f.codebook, {}, *f.system);
  CHECK(rep.failed == rep.total());
  CHECK(rep.verdicts[0].failure == FailureKind::Transport);
}

TEST_CASE("client errors are refusals and are not retried") {
  Fixture f;
  mock::ChatServer server(f.system, f.codebook);
  server.fail_status = 403;
  server.fail_remaining = 1;
  RemoteChatBackend remote(f.config(server));
  try {
    remote.complete(query(f, "A", "B"));
    FAIL("expected a refusal");
  } catch (const ProviderRefusal& e) {
    CHECK(e.status() == 403);
  }
  CHECK(server.requests == 1);
}

TEST_CASE("unreachable endpoint becomes Transport verdicts") {
  Fixture f;
  RemoteConfig c;
  {
    mock::ChatServer server(f.system, f.codebook);
    c = f.config(server);
  }  // server gone: the port refuses connections
  c.retry.max_attempts = 2;
  c.cache_dir.clear();
  RemoteChatBackend remote(c);
  remote.set_logger([](const std::string&) {});
  auto rep = verify_rules<Token>(remote, *f.codebook, {}, *f.system);
  CHECK(rep.failed == rep.total());
  for (const auto& v : rep.verdicts) CHECK(v.failure == FailureKind::Transport);
}

TEST_CASE("tampered cache entries are detected") {
  Fixture f;
  mock::ChatServer server(f.system, f.codebook);
  auto q = query(f, "A", "B");
  RemoteChatBackend(f.config(server)).complete(q);
  fs::path req;
  for (const auto& e : fs::directory_iterator(f.cache))
    if (e.path().string().ends_with(".request.json")) req = e.path();
  REQUIRE(!req.empty());

  SUBCASE("edited request") {
    std::ofstream(req) << "{}";
    CHECK_THROWS_AS(RemoteChatBackend(f.config(server)).complete(q), CacheCorruption);
  }
  SUBCASE("missing request") {
    fs::remove(req);
    CHECK_THROWS_AS(RemoteChatBackend(f.config(server)).complete(q), CacheCorruption);
  }
}

TEST_CASE("credential is sent from the named environment variable") {
  Fixture f;
  mock::ChatServer server(f.system, f.codebook);
  ::setenv("LAGSIM_TEST_KEY", "secret-value", 1);
  auto cfg = f.config(server);
  cfg.api_key_env = "LAGSIM_TEST_KEY";
  cfg.cache_dir.clear();
  RemoteChatBackend remote(cfg);
  remote.complete(query(f, "A", "B"));
  CHECK(server.last_authorization == "Bearer secret-value");
  CHECK(server.last_request.find("secret-value") == std::string::npos);
  ::unsetenv("LAGSIM_TEST_KEY");
}

TEST_CASE("remote config from TOML") {
  auto t = ConfigTable::parse(R"(
[backend]
kind = "remote"
endpoint = "http://localhost:9/v1/chat/completions"
model = "m1"
api_key_env = "KEY"
seed = 3
cache_dir = "cache"
max_attempts = 4
backoff_ms = 10
system_prompt = "a b c"
)");
  auto c = remote_config_from(t, "/base");
  CHECK(c.model == "m1");
  CHECK(c.seed == 3);
  CHECK(c.cache_dir == fs::path("/base/cache"));
  CHECK(c.retry.max_attempts == 4);
  CHECK(c.retry.backoff == std::chrono::milliseconds(10));
  CHECK(c.system_prompt == std::vector<Token>{"a", "b", "c"});
  c.endpoint = "localhost";
  CHECK_THROWS_AS(RemoteChatBackend{c}, ConfigError);
}
