// Chat-completions HTTP client with retry/backoff, shared by the judge and
// the evaluation harness.
#pragma once

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>
#include <string_view>
#include <thread>

#include <httplib.h>

#include "ctxeval/core.hpp"

namespace ctxeval {

class EndpointError : public Error {
 public:
  using Error::Error;
};

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8080";
  std::string model_name = "gpt-4o-mini";
  std::string api_key;
  int max_parallel = 4;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 2;
  bool verbose = false;

  void validate() const {
    if (max_parallel < 1) throw ValidationError("max_parallel must be at least 1");
    if (base_url.empty()) throw ValidationError("base_url must be non-empty");
  }
};

// Environment defaults: LLM_BASE_URL, LLM_API_KEY, LLM_MODEL.
inline EndpointConfig endpoint_config_from_env() {
  EndpointConfig cfg;
  if (const char* url = std::getenv("LLM_BASE_URL")) cfg.base_url = url;
  if (const char* key = std::getenv("LLM_API_KEY")) cfg.api_key = key;
  if (const char* model = std::getenv("LLM_MODEL")) cfg.model_name = model;
  return cfg;
}

namespace detail {

// Splits "http://host:port/prefix" into the client origin and path prefix.
inline std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  const std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = base_url.find('/', host_start);
  if (path_start == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, path_start), prefix};
}

}  // namespace detail

// POSTs {model, messages, temperature} to {base_url}/chat/completions and
// returns the first choice's message content. Connection failures and 5xx
// responses are retried with exponential backoff.
class LlmClient {
 public:
  struct CallStats {
    int retries = 0;
  };

  explicit LlmClient(EndpointConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const EndpointConfig& config() const { return cfg_; }

  std::string complete(const std::string& prompt, double temperature,
                       CallStats* stats = nullptr) const {
    const json body{{"model", cfg_.model_name},
                    {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
                    {"temperature", temperature}};
    const std::string payload = body.dump();
    if (cfg_.verbose) {
      std::cerr << "[llm] POST " << cfg_.base_url << "/chat/completions"
                << (cfg_.api_key.empty() ? "" : " (authorization: Bearer ***)") << "\n"
                << payload << std::endl;
    }

    const auto [origin, prefix] = detail::split_base_url(cfg_.base_url);
    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0) {
        if (stats != nullptr) ++stats->retries;
        std::this_thread::sleep_for(std::chrono::milliseconds(50) * (1 << (attempt - 1)));
      }
      httplib::Client client(origin);
      client.set_connection_timeout(cfg_.timeout);
      client.set_read_timeout(cfg_.timeout);
      client.set_write_timeout(cfg_.timeout);
      httplib::Headers headers;
      if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

      auto res = client.Post(prefix + "/chat/completions", headers, payload, "application/json");
      if (!res) {
        last_error = "transport failure: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500) {
        last_error = "server error: HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw EndpointError("endpoint rejected request: HTTP " + std::to_string(res->status) +
                            " " + res->body);
      }
      if (cfg_.verbose) std::cerr << "[llm] response: " << res->body << std::endl;
      json parsed = json::parse(res->body, nullptr, false);
      if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty() ||
          !parsed["choices"][0].contains("message")) {
        throw EndpointError("malformed chat completion response: " + res->body);
      }
      return parsed["choices"][0]["message"].value("content", "");
    }
    throw EndpointError("endpoint unreachable after " + std::to_string(cfg_.max_retries + 1) +
                        " attempts: " + last_error);
  }

 private:
  EndpointConfig cfg_;
};

}  // namespace ctxeval
