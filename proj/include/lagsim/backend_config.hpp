#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "lagsim/backends.hpp"
#include "lagsim/codebook.hpp"
#include "lagsim/config.hpp"
#include "lagsim/lag.hpp"
#include "lagsim/remote.hpp"

namespace lagsim {

/// Loads a rule file. If `<path>.json` (a compile sidecar) exists, its
/// alphabet is used so that ids match the compiler's; otherwise the
/// alphabet is inferred from the rules. Throws SyntaxError / Error.
LagSystem load_lag_system(const std::filesystem::path& path);

/// Copy of `system` with the rule for `spec`'s lhs replaced, where spec is
/// "A B -> C [D]".
LagSystem corrupt_rule(const LagSystem& system, const std::string& spec);

/// `count` distinct tokens t0, t1, ... enough for pair codewords.
TokenAlphabet default_token_alphabet(std::size_t symbols);

struct TokenSetup {
  std::shared_ptr<const TokenBackend> backend;
  std::shared_ptr<const Codebook> codebook;
  std::vector<Token> prompt;
  std::shared_ptr<const RemoteChatBackend> remote;  // set for kind = "remote"
};

struct VectorSetup {
  std::shared_ptr<const VectorBackend> backend;
  std::shared_ptr<const Codebook> codebook;
  std::shared_ptr<const SequenceNet> net;
};

using BackendSetup = std::variant<TokenSetup, VectorSetup>;

/// Builds the backend described by the `[backend]` table:
///   kind = "rule-table" | "remote" | "rnn" | "attention"
///   codebook = "file.json"       (token or vector codebook; optional for token kinds)
///   tokens = ["a", "b", ...]     (pair codebook over these tokens)
///   system_prompt = "..."        (whitespace-separated tokens)
///   corrupt = "A B -> C"         (rule-table only: serve a wrong rule)
///   d, seed                      (rnn / attention; same weights as a
///                                  training run with that seed)
/// Relative paths resolve against `base_dir`.
BackendSetup make_backend(const ConfigTable& table, const LagSystem& system, const std::filesystem::path& base_dir);

}  // namespace lagsim
