#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "lagsim/config.hpp"
#include "lagsim/decoding.hpp"

namespace lagsim {

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds backoff{200};  // doubled after each failed attempt
};

struct RemoteConfig {
  std::string endpoint;     // e.g. http://127.0.0.1:8080/v1/chat/completions
  std::string model;
  std::string api_key_env;  // name of the environment variable holding the key
  long long seed = 0;
  int max_tokens = 16;
  std::vector<Token> system_prompt;
  std::filesystem::path cache_dir;  // empty disables caching
  RetryPolicy retry;
  std::chrono::milliseconds min_interval{0};  // rate limit between requests
  std::chrono::seconds timeout{60};
  std::size_t context_window = 8192;
};

/// Chat-completions client. One query is one request; the reply text is
/// split on whitespace into tokens. Requests are cached on disk by the
/// SHA-256 of their canonical JSON and serialized through a rate limiter.
class RemoteChatBackend : public TokenBackend {
 public:
  explicit RemoteChatBackend(RemoteConfig config);

  std::size_t context_window() const override { return cfg_.context_window; }
  Token next(std::span<const Token> context) const override;
  std::vector<Token> respond(std::span<const Token> context, std::size_t max_units,
                             const std::function<bool(std::span<const Token>)>& done) const override;
  std::string identity() const override { return "remote:" + cfg_.model; }

  /// Canonical request body for a query context.
  std::string request_json(std::span<const Token> context) const;
  /// Raw reply text, from cache or network.
  std::string complete(std::span<const Token> context) const;

  std::size_t network_requests() const { return network_requests_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }
  /// Attempts made by the most recent network request.
  int last_attempts() const { return last_attempts_.load(); }

  /// Receives retry log lines; defaults to stderr.
  void set_logger(std::function<void(const std::string&)> log) { log_ = std::move(log); }

 private:
  std::optional<std::string> cache_lookup(const std::string& hash, const std::string& request) const;
  void cache_store(const std::string& hash, const std::string& request, const std::string& reply) const;
  std::string post(const std::string& body) const;

  RemoteConfig cfg_;
  std::string scheme_host_port_;
  std::string path_;
  mutable std::mutex pipeline_;
  mutable std::chrono::steady_clock::time_point last_request_{};
  mutable std::atomic<std::size_t> network_requests_{0};
  mutable std::atomic<std::size_t> cache_hits_{0};
  mutable std::atomic<int> last_attempts_{0};
  std::function<void(const std::string&)> log_;
};

/// Builds a RemoteConfig from a TOML [backend] table.
RemoteConfig remote_config_from(const ConfigTable& table, const std::filesystem::path& base_dir);

}  // namespace lagsim
