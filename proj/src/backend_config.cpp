#include "lagsim/backend_config.hpp"

#include <cmath>
#include <sstream>

#include "lagsim/compiler.hpp"
#include "lagsim/error.hpp"
#include "lagsim/trainer.hpp"

namespace lagsim {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::vector<Token> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<Token> out;
  for (Token t; in >> t;) out.push_back(t);
  return out;
}

}  // namespace

LagSystem load_lag_system(const fs::path& path) {
  if (!fs::exists(path)) throw Error("rule file not found: " + path.string());
  const auto rules = parse_rule_file(read_file(path.string()));
  fs::path sidecar = path;
  sidecar += ".json";
  Alphabet alphabet = fs::exists(sidecar) ? alphabet_from_sidecar(read_file(sidecar.string())) : alphabet_for_rules(rules);
  return LagSystem::from_text(rules, std::move(alphabet));
}

LagSystem corrupt_rule(const LagSystem& system, const std::string& spec) {
  const auto parsed = parse_rule_file(spec);
  if (parsed.size() != 1) throw ConfigError("corrupt must hold exactly one rule");
  const auto& a = system.alphabet();
  ProductionRule wrong;
  for (const auto& l : parsed[0].lhs) wrong.lhs.push_back(a.at(l));
  for (const auto& l : parsed[0].rhs) wrong.rhs.push_back(a.at(l));
  std::vector<ProductionRule> rules = system.rules();
  bool found = false;
  for (auto& r : rules)
    if (r.lhs == wrong.lhs) {
      if (r.rhs == wrong.rhs) throw ConfigError("corrupt rule equals the original: " + spec);
      r.rhs = wrong.rhs;
      found = true;
    }
  if (!found) throw ConfigError("corrupt rule has no matching lhs: " + spec);
  return LagSystem(a, std::move(rules), system.lag(), system.deletion());
}

TokenAlphabet default_token_alphabet(std::size_t symbols) {
  std::size_t n = 1;
  while (n * n < symbols) ++n;
  TokenAlphabet t;
  for (std::size_t i = 0; i < n; ++i) t.tokens.push_back("t" + std::to_string(i));
  t.halt_token = t.tokens.front();
  return t;
}

BackendSetup make_backend(const ConfigTable& t, const LagSystem& system, const fs::path& base_dir) {
  const std::string kind = t.get_string("backend.kind");
  const std::string codebook_path = t.get_string("backend.codebook", "");
  auto load_codebook = [&] {
    return std::make_shared<const Codebook>(
        codebook_from_json(read_file(resolve(base_dir, codebook_path).string()), system.alphabet()));
  };

  if (kind == "rule-table" || kind == "remote") {
    TokenSetup s;
    if (!codebook_path.empty()) {
      s.codebook = load_codebook();
    } else if (t.has("backend.tokens")) {
      TokenAlphabet tokens{t.get_strings("backend.tokens"), ""};
      tokens.halt_token = tokens.tokens.empty() ? "" : tokens.tokens.front();
      s.codebook = std::make_shared<const Codebook>(build_pair_codebook(system.alphabet(), tokens));
    } else {
      s.codebook = std::make_shared<const Codebook>(
          build_pair_codebook(system.alphabet(), default_token_alphabet(system.alphabet().size())));
    }
    if (s.codebook->kind() != CodebookKind::Token) throw ConfigError(kind + " backend needs a token codebook");
    s.prompt = split_ws(t.get_string("backend.system_prompt", ""));
    if (kind == "rule-table") {
      auto sys = std::make_shared<const LagSystem>(
          t.has("backend.corrupt") ? corrupt_rule(system, t.get_string("backend.corrupt")) : system);
      s.backend = std::make_shared<RuleTableBackend<Token>>(sys, s.codebook, s.prompt);
    } else {
      auto remote = std::make_shared<RemoteChatBackend>(remote_config_from(t, base_dir));
      s.remote = remote;
      s.backend = remote;
    }
    return s;
  }

  if (kind == "rnn" || kind == "attention") {
    VectorSetup s;
    if (codebook_path.empty()) throw ConfigError(kind + " backend needs backend.codebook");
    s.codebook = load_codebook();
    if (s.codebook->kind() != CodebookKind::Vector) throw ConfigError(kind + " backend needs a vector codebook");
    const auto d = static_cast<Eigen::Index>(t.get_number("backend.d"));
    const auto seed = static_cast<std::uint64_t>(t.get_number("backend.seed", 0));
    s.net = sweep_backend(kind, d, seed);
    if (s.codebook->dimension() != d) throw DimensionMismatch("codebook dimension differs from backend.d");
    s.backend = std::make_shared<NetBackend>(s.net, s.codebook);
    return s;
  }
  throw ConfigError("unknown backend kind '" + kind + "'");
}

}  // namespace lagsim
