// Evaluation harness: runs the budget-constrained prompt assembly ->
// endpoint call -> post-processing -> scoring pipeline per episode and
// aggregates suite-level reports.
#pragma once

#include <atomic>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ctxeval/core.hpp"
#include "ctxeval/grpo.hpp"
#include "ctxeval/judge.hpp"
#include "ctxeval/llm_client.hpp"
#include "ctxeval/mock_endpoint.hpp"
#include "ctxeval/postprocess.hpp"
#include "ctxeval/prompts.hpp"
#include "ctxeval/pruning.hpp"
#include "ctxeval/reward.hpp"

namespace ctxeval {

struct RunConfig {
  int task = 1;  // 1 tool calling, 2 dialogue, 3 both
  TokenBudget budget;
  RewardWeights weights;
  GrpoConfig grpo;
  EndpointConfig endpoint;
  std::filesystem::path dataset_path;
  std::filesystem::path output_path;
  std::optional<std::filesystem::path> mock_script;
  ToolsetAnnotations annotations;

  void validate() const {
    if (task < 1 || task > 3) throw ValidationError("task must be 1, 2, or 3");
    budget.validate();
    weights.validate();
    grpo.validate();
    endpoint.validate();
  }
};

struct EpisodeReport {
  std::string episode_id;
  std::optional<double> r_tool;
  std::optional<double> r_dlg;
  std::optional<double> r_combined;
  PruneReport prune_report;
  PostprocessReport postprocess_report;
  std::optional<JudgeVerdict> judge_verdict;
  int malformed_blocks = 0;
  json transcript = json::array();
  std::optional<std::string> error;
};

namespace detail {

// Tokens reserved for template boilerplate plus rendering glue (role
// prefixes, separators, tool-call tags) that the context counter does not
// itself charge for.
inline constexpr int kPromptAssemblySlack = 8;

inline int history_tool_call_count(const Episode& episode) {
  int n = 0;
  for (const auto& m : episode.messages) n += static_cast<int>(m.tool_calls.size());
  return n;
}

inline int template_base_tokens(std::string_view tmpl) {
  // cost of the template with every slot empty
  std::string stripped;
  stripped.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      stripped.append(tmpl.substr(pos));
      break;
    }
    const auto close = tmpl.find('}', open + 1);
    if (close == std::string_view::npos) {
      stripped.append(tmpl.substr(pos));
      break;
    }
    stripped.append(tmpl.substr(pos, open - pos));
    pos = close + 1;
  }
  return count_tokens(stripped);
}

inline TokenBudget effective_budget(const RunConfig& cfg, const Episode& episode,
                                    std::string_view tmpl, int extra_content_tokens) {
  const int reserved = template_base_tokens(tmpl) + kPromptAssemblySlack +
                       history_tool_call_count(episode) + extra_content_tokens;
  TokenBudget out = cfg.budget;
  out.input_limit = std::max(1, cfg.budget.input_limit - reserved);
  return out;
}

inline void add_transcript_entry(EpisodeReport& report, const RunConfig& cfg,
                                 std::string_view phase, const std::string& prompt,
                                 const std::string& response) {
  report.transcript.push_back(json{{"phase", std::string(phase)},
                                   {"prompt_tokens", count_tokens(prompt)},
                                   {"within_budget", count_tokens(prompt) <= cfg.budget.input_limit},
                                   {"response_tokens", count_tokens(response)},
                                   {"prompt", prompt},
                                   {"response", response}});
}

inline std::string last_user_query_or_empty(const Episode& episode) {
  for (auto it = episode.messages.rbegin(); it != episode.messages.rend(); ++it) {
    if (it->role == Role::User) return it->content;
  }
  return "";
}

}  // namespace detail

// Task 1: prune -> prompt -> call -> parse -> postprocess -> F1 vs gold.
// Task 2: pick level -> distill -> prompt -> call -> judge -> normalize.
// Task 3: both, then the weighted blend. Endpoint and judge failures land in
// the report's error field; the caller decides whether to continue.
inline EpisodeReport run_episode(const Episode& episode, const RunConfig& cfg,
                                 const LlmClient& model, const JudgeClient& judge) {
  EpisodeReport report;
  report.episode_id = episode.id;
  const std::string user_query = detail::last_user_query_or_empty(episode);
  const KnowledgeBase* kb =
      episode.knowledge_base.has_value() ? &*episode.knowledge_base : nullptr;

  try {
    std::vector<ToolCall> processed_calls;

    if (cfg.task == 1 || cfg.task == 3) {
      const TokenBudget tool_budget =
          detail::effective_budget(cfg, episode, kTask1PromptTemplate, 0);
      auto [pruned, prune_report] = prune_toolset(episode.messages, episode.tools, tool_budget);
      report.prune_report = std::move(prune_report);

      const std::string prompt = render_task1_prompt(episode, pruned);
      const std::string response = model.complete(prompt, 0.0);
      detail::add_transcript_entry(report, cfg, "task1", prompt, response);

      auto parsed = parse_tool_calls(response);
      report.malformed_blocks = parsed.malformed;
      auto [calls, post_report] = postprocess_tool_calls(parsed.calls, episode.tools,
                                                         cfg.annotations, kb, user_query);
      report.postprocess_report = std::move(post_report);
      processed_calls = std::move(calls);
      report.r_tool = tool_call_f1(processed_calls, episode.gold_tool_calls);
    }

    if (cfg.task == 2 || cfg.task == 3) {
      std::string function_results;
      for (std::size_t i = 0; i < processed_calls.size(); ++i) {
        if (i > 0) function_results += "\n";
        function_results += format_tool_call_block(processed_calls[i]);
      }
      const std::string item_knowledge = render_item_knowledge(episode.knowledge_base);
      const TokenBudget persona_budget = detail::effective_budget(
          cfg, episode, kTask2PromptTemplate,
          count_tokens(function_results) + count_tokens(item_knowledge));

      const int level =
          select_reduction_level(episode.persona, episode.messages, {}, persona_budget);
      const std::string persona_block = distill_persona(episode.persona, level);
      const std::string prompt = render_task2_prompt(episode, persona_block, function_results);
      if (count_tokens(prompt) > cfg.budget.input_limit) {
        report.prune_report.floor_reached = true;  // distillation ran out of material
      }
      const std::string response = model.complete(prompt, 0.0);
      detail::add_transcript_entry(report, cfg, "task2", prompt, response);

      report.judge_verdict = judge.judge_response(episode, response);
      report.r_dlg = roleplay_reward(report.judge_verdict->score);
    }

    if (cfg.task == 3 && report.r_tool && report.r_dlg) {
      report.r_combined = combined_reward(*report.r_tool, *report.r_dlg, cfg.weights);
    }
  } catch (const std::exception& e) {
    report.error = e.what();
  }
  return report;
}

// ---- Report serialization ----

namespace detail {

inline json optional_number(const std::optional<double>& value) {
  return value ? json(*value) : json(nullptr);
}

inline json prune_report_to_json(const PruneReport& r) {
  return json{{"removed_tools", r.removed_tools},
              {"truncation_passes", r.truncation_passes},
              {"final_tokens", r.final_tokens},
              {"floor_reached", r.floor_reached},
              {"stage_tokens", r.stage_tokens}};
}

inline json postprocess_report_to_json(const PostprocessReport& r) {
  json dropped = json::array();
  for (const auto& d : r.dropped_calls) {
    dropped.push_back(json{{"call", tool_call_to_json(d.call)}, {"reason", d.reason}});
  }
  json merged = json::array();
  for (const auto& g : r.merged_groups) {
    json inputs = json::array();
    for (const auto& c : g.inputs) inputs.push_back(tool_call_to_json(c));
    merged.push_back(json{{"inputs", std::move(inputs)}, {"output", tool_call_to_json(g.output)}});
  }
  return json{{"dropped_calls", std::move(dropped)},
              {"merged_groups", std::move(merged)},
              {"coercions", r.coercions}};
}

inline json episode_report_to_json(const EpisodeReport& r) {
  json j{{"id", r.episode_id},
         {"r_tool", optional_number(r.r_tool)},
         {"r_dlg", optional_number(r.r_dlg)},
         {"r_combined", optional_number(r.r_combined)},
         {"malformed_blocks", r.malformed_blocks},
         {"prune_report", prune_report_to_json(r.prune_report)},
         {"postprocess_report", postprocess_report_to_json(r.postprocess_report)}};
  j["judge_verdict"] = r.judge_verdict
                           ? json{{"reason", r.judge_verdict->reason},
                                  {"score", r.judge_verdict->score}}
                           : json(nullptr);
  j["transcript"] = r.transcript;
  j["error"] = r.error ? json(*r.error) : json(nullptr);
  return j;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

struct SuiteResult {
  json report;
  int episodes_failed = 0;
};

// Loads the dataset, runs every episode (concurrently up to max_parallel),
// and writes the aggregate JSON report. Deterministic given a deterministic
// endpoint, except for the generated_at timestamp.
inline SuiteResult run_suite(const RunConfig& config) {
  RunConfig cfg = config;
  cfg.validate();
  auto episodes = load_dataset(cfg.dataset_path);

  std::unique_ptr<MockEndpoint> mock;
  if (cfg.mock_script) {
    mock = std::make_unique<MockEndpoint>(load_mock_script(*cfg.mock_script));
    cfg.endpoint.base_url = mock->base_url();
  }
  const LlmClient model(cfg.endpoint);
  const JudgeClient judge(cfg.endpoint);

  std::vector<EpisodeReport> reports(episodes.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= episodes.size()) return;
      reports[i] = run_episode(episodes[i], cfg, model, judge);
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(
      1, std::min<std::size_t>(static_cast<std::size_t>(cfg.endpoint.max_parallel),
                               episodes.size() == 0 ? 1 : episodes.size()));
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t + 1 < n_threads; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  std::sort(reports.begin(), reports.end(),
            [](const EpisodeReport& a, const EpisodeReport& b) {
              return a.episode_id < b.episode_id;
            });

  int failed = 0;
  int malformed_total = 0;
  int floor_count = 0;
  double sum_tool = 0.0, sum_dlg = 0.0, sum_combined = 0.0;
  int n_tool = 0, n_dlg = 0, n_combined = 0;
  for (const auto& r : reports) {
    if (r.error) ++failed;
    malformed_total += r.malformed_blocks;
    if (r.prune_report.floor_reached) ++floor_count;
    if (r.r_tool) {
      sum_tool += *r.r_tool;
      ++n_tool;
    }
    if (r.r_dlg) {
      sum_dlg += *r.r_dlg;
      ++n_dlg;
    }
    if (r.r_combined) {
      sum_combined += *r.r_combined;
      ++n_combined;
    }
  }

  json episode_array = json::array();
  for (const auto& r : reports) episode_array.push_back(detail::episode_report_to_json(r));

  json report{
      {"generated_at", detail::utc_timestamp()},
      {"task", cfg.task},
      {"model", cfg.endpoint.model_name},
      {"dataset", cfg.dataset_path.filename().string()},
      {"budget", json{{"input_limit", cfg.budget.input_limit},
                      {"output_limit", cfg.budget.output_limit}}},
      {"weights", json{{"eta_tool", cfg.weights.eta_tool}, {"eta_dlg", cfg.weights.eta_dlg}}},
      {"grpo", json{{"clip_eps", cfg.grpo.clip_eps},
                    {"entropy_alpha", cfg.grpo.entropy_alpha},
                    {"kl_beta_init", cfg.grpo.kl_beta_init},
                    {"kl_target", cfg.grpo.kl_target},
                    {"kl_coef", cfg.grpo.kl_coef},
                    {"group_size", cfg.grpo.group_size}}},
      {"aggregates",
       json{{"episodes", episodes.size()},
            {"failed", failed},
            {"mean_r_tool", n_tool > 0 ? json(sum_tool / n_tool) : json(nullptr)},
            {"mean_r_dlg", n_dlg > 0 ? json(sum_dlg / n_dlg) : json(nullptr)},
            {"mean_r_combined", n_combined > 0 ? json(sum_combined / n_combined) : json(nullptr)},
            {"malformed_blocks", malformed_total},
            {"prune_floor_count", floor_count}}},
      {"episodes", std::move(episode_array)}};

  if (!cfg.output_path.empty()) {
    if (cfg.output_path.has_parent_path()) {
      std::filesystem::create_directories(cfg.output_path.parent_path());
    }
    std::ofstream out(cfg.output_path);
    if (!out) throw DatasetError("cannot write report: " + cfg.output_path.string());
    out << report.dump(2) << '\n';
  }
  return {std::move(report), failed};
}

}  // namespace ctxeval
