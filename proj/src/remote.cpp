#include "lagsim/remote.hpp"

#include <httplib.h>

#include <cstdlib>
#include <iostream>
#include "json.hpp"
#include <sstream>
#include <thread>

#include "lagsim/error.hpp"
#include "lagsim/hashing.hpp"

namespace lagsim {

namespace {

std::string join(std::span<const Token> units) {
  std::string s;
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (i) s += ' ';
    s += units[i];
  }
  return s;
}

std::vector<Token> split_ws(const std::string& text) {
  std::istringstream in(text);
  std::vector<Token> out;
  for (Token t; in >> t;) out.push_back(t);
  return out;
}

std::string reply_content(const std::string& body) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw TransportError("response is not JSON");
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("response lacks choices[0].message.content: ") + e.what());
  }
}

}  // namespace

RemoteChatBackend::RemoteChatBackend(RemoteConfig config) : cfg_(std::move(config)) {
  const auto scheme_end = cfg_.endpoint.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint must start with http:// or https://");
  const auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
  scheme_host_port_ = cfg_.endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : cfg_.endpoint.substr(path_start);
  if (cfg_.retry.max_attempts < 1) throw ConfigError("retry max_attempts must be at least 1");
  log_ = [](const std::string& line) { std::cerr << line << '\n'; };
}

std::string RemoteChatBackend::request_json(std::span<const Token> context) const {
  const auto& s = cfg_.system_prompt;
  if (context.size() < s.size() || !std::equal(s.begin(), s.end(), context.begin()))
    throw Error("query context does not start with the configured system prompt");
  nlohmann::json req;
  req["model"] = cfg_.model;
  req["messages"] = nlohmann::json::array(
      {{{"role", "system"}, {"content", join(s)}},
       {{"role", "user"}, {"content", join(context.subspan(s.size()))}}});
  req["temperature"] = 0;
  req["seed"] = cfg_.seed;
  req["max_tokens"] = cfg_.max_tokens;
  return req.dump();
}

std::optional<std::string> RemoteChatBackend::cache_lookup(const std::string& hash, const std::string& request) const {
  if (cfg_.cache_dir.empty()) return std::nullopt;
  const auto req_path = cfg_.cache_dir / (hash + ".request.json");
  const auto resp_path = cfg_.cache_dir / (hash + ".response.json");
  if (!std::filesystem::exists(resp_path)) return std::nullopt;
  if (!std::filesystem::exists(req_path)) throw CacheCorruption("cache entry " + hash + " has no request file");
  const std::string stored = read_file(req_path.string());
  if (sha256_hex(stored) != hash || stored != request)
    throw CacheCorruption("cache entry " + hash + " does not match its request hash");
  return read_file(resp_path.string());
}

void RemoteChatBackend::cache_store(const std::string& hash, const std::string& request,
                                    const std::string& reply) const {
  if (cfg_.cache_dir.empty()) return;
  write_file_atomic((cfg_.cache_dir / (hash + ".request.json")).string(), request);
  write_file_atomic((cfg_.cache_dir / (hash + ".response.json")).string(), reply);
}

std::string RemoteChatBackend::post(const std::string& body) const {
  std::lock_guard lock(pipeline_);
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(cfg_.timeout);
  client.set_read_timeout(cfg_.timeout);
  client.set_write_timeout(cfg_.timeout);
  httplib::Headers headers;
  if (!cfg_.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()))
      headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  auto backoff = cfg_.retry.backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
    if (cfg_.min_interval.count() > 0) {
      const auto ready = last_request_ + cfg_.min_interval;
      if (std::chrono::steady_clock::now() < ready) std::this_thread::sleep_until(ready);
    }
    last_request_ = std::chrono::steady_clock::now();
    ++network_requests_;
    last_attempts_ = attempt;
    auto res = client.Post(path_, headers, body, "application/json");
    if (res && res->status == 200) {
      if (attempt > 1) log_("remote: succeeded after " + std::to_string(attempt) + " attempts");
      return res->body;
    }
    if (res && res->status >= 400 && res->status < 500 && res->status != 429)
      throw ProviderRefusal(res->status, res->body.substr(0, 200));
    last_error = res ? "HTTP " + std::to_string(res->status) : "transport error: " + httplib::to_string(res.error());
    log_("remote: attempt " + std::to_string(attempt) + " failed (" + last_error + ")");
    if (attempt < cfg_.retry.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw TransportError("request failed after " + std::to_string(cfg_.retry.max_attempts) + " attempts: " + last_error);
}

std::string RemoteChatBackend::complete(std::span<const Token> context) const {
  const std::string request = request_json(context);
  const std::string hash = sha256_hex(request);
  if (auto cached = cache_lookup(hash, request)) {
    ++cache_hits_;
    return reply_content(*cached);
  }
  const std::string body = post(request);
  std::string content = reply_content(body);  // validate before caching
  cache_store(hash, request, body);
  return content;
}

std::vector<Token> RemoteChatBackend::respond(std::span<const Token> context, std::size_t max_units,
                                              const std::function<bool(std::span<const Token>)>&) const {
  auto tokens = split_ws(complete(context));
  if (tokens.size() > max_units) tokens.resize(max_units);
  return tokens;
}

Token RemoteChatBackend::next(std::span<const Token> context) const {
  // Only meaningful for a bare query: the first token of the full reply.
  auto tokens = split_ws(complete(context));
  return tokens.empty() ? Token{} : tokens.front();
}

RemoteConfig remote_config_from(const ConfigTable& t, const std::filesystem::path& base_dir) {
  RemoteConfig c;
  c.endpoint = t.get_string("backend.endpoint");
  c.model = t.get_string("backend.model", "default");
  c.api_key_env = t.get_string("backend.api_key_env", "");
  c.seed = static_cast<long long>(t.get_number("backend.seed", 0));
  c.max_tokens = static_cast<int>(t.get_number("backend.max_tokens", 16));
  const std::string cache = t.get_string("backend.cache_dir", "");
  if (!cache.empty()) {
    std::filesystem::path p(cache);
    c.cache_dir = p.is_absolute() ? p : base_dir / p;
  }
  c.retry.max_attempts = static_cast<int>(t.get_number("backend.max_attempts", 5));
  c.retry.backoff = std::chrono::milliseconds(static_cast<long long>(t.get_number("backend.backoff_ms", 200)));
  c.min_interval = std::chrono::milliseconds(static_cast<long long>(t.get_number("backend.min_interval_ms", 0)));
  c.timeout = std::chrono::seconds(static_cast<long long>(t.get_number("backend.timeout_s", 60)));
  c.context_window = static_cast<std::size_t>(t.get_number("backend.context_window", 8192));
  const std::string prompt = t.get_string("backend.system_prompt", "");
  c.system_prompt = split_ws(prompt);
  return c;
}

}  // namespace lagsim
