// Scriptable in-process chat-completions server for hermetic tests: rules
// match substrings of the incoming prompt and serve canned responses;
// every request is logged in arrival order.
#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "ctxeval/core.hpp"
#include "ctxeval/llm_client.hpp"

namespace ctxeval {

struct MockRule {
  std::vector<std::string> match;  // all substrings must occur in the prompt
  std::string content;
  int status = 200;
  int delay_ms = 0;
  int times = -1;  // -1 = unlimited; otherwise consumed per match
};

struct MockScript {
  std::string default_content = "OK";
  std::vector<MockRule> rules;
};

inline MockScript mock_script_from_json(const json& j) {
  MockScript script;
  if (j.contains("default")) script.default_content = j["default"].get<std::string>();
  if (j.contains("rules")) {
    for (const auto& r : j["rules"]) {
      MockRule rule;
      const auto& match = r.at("match");
      if (match.is_string()) {
        rule.match.push_back(match.get<std::string>());
      } else {
        for (const auto& m : match) rule.match.push_back(m.get<std::string>());
      }
      rule.content = r.value("content", "");
      rule.status = r.value("status", 200);
      rule.delay_ms = r.value("delay_ms", 0);
      rule.times = r.value("times", -1);
      script.rules.push_back(std::move(rule));
    }
  }
  return script;
}

inline MockScript load_mock_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open mock script: " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DatasetError("malformed mock script JSON: " + path.string());
  return mock_script_from_json(j);
}

class MockEndpoint;

inline std::unique_ptr<MockEndpoint> mock_endpoint_serve(const std::filesystem::path& script_path,
                                                         int port = 0);

class MockEndpoint {
 public:
  // port 0 picks a free ephemeral port; a busy fixed port raises.
  explicit MockEndpoint(MockScript script, int port = 0)
      : script_(std::move(script)) {
    // SO_REUSEADDR only: a second endpoint on the same port must fail loudly
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes),
                 sizeof(yes));
    });
    server_.Post("/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res);
    });
    if (port == 0) {
      port_ = server_.bind_to_any_port("127.0.0.1");
      if (port_ < 0) throw EndpointError("mock endpoint could not bind an ephemeral port");
    } else {
      if (!server_.bind_to_port("127.0.0.1", port)) {
        throw EndpointError("mock endpoint port " + std::to_string(port) + " is busy");
      }
      port_ = port;
    }
    thread_ = std::thread([this]() { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  MockEndpoint(const MockEndpoint&) = delete;
  MockEndpoint& operator=(const MockEndpoint&) = delete;

  ~MockEndpoint() { stop(); }

  void stop() {
    if (thread_.joinable()) {
      server_.stop();
      thread_.join();
    }
  }

  int port() const { return port_; }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  // Request bodies in arrival order; unmatched requests are flagged.
  std::vector<json> request_log() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return log_;
  }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    std::string prompt;
    if (body.is_object() && body.contains("messages") && body["messages"].is_array() &&
        !body["messages"].empty() && body["messages"].back().is_object()) {
      prompt = body["messages"].back().value("content", "");
    }

    const MockRule* chosen = nullptr;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      for (auto& rule : script_.rules) {
        if (rule.times == 0) continue;
        bool all = true;
        for (const auto& needle : rule.match) {
          if (prompt.find(needle) == std::string::npos) {
            all = false;
            break;
          }
        }
        if (all) {
          if (rule.times > 0) --rule.times;
          chosen = &rule;
          break;
        }
      }
      json entry{{"body", body.is_discarded() ? json(req.body) : body},
                 {"matched", chosen != nullptr}};
      log_.push_back(std::move(entry));
    }

    if (chosen != nullptr && chosen->delay_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(chosen->delay_ms));
    }
    const int status = chosen != nullptr ? chosen->status : 200;
    const std::string content = chosen != nullptr ? chosen->content : script_.default_content;
    res.status = status;
    if (status == 200) {
      json reply{{"id", "mock"},
                 {"object", "chat.completion"},
                 {"model", body.is_object() ? body.value("model", "mock") : "mock"},
                 {"choices", json::array({json{{"index", 0},
                                               {"message", json{{"role", "assistant"},
                                                                {"content", content}}},
                                               {"finish_reason", "stop"}}})}};
      res.set_content(reply.dump(), "application/json");
    } else {
      res.set_content("scripted failure", "text/plain");
    }
  }

  MockScript script_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mutex_;
  std::vector<json> log_;
};

inline std::unique_ptr<MockEndpoint> mock_endpoint_serve(const std::filesystem::path& script_path,
                                                         int port) {
  return std::make_unique<MockEndpoint>(load_mock_script(script_path), port);
}

}  // namespace ctxeval
