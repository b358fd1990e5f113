// LLM-as-judge scoring: the four-dimension rubric prompt, XML verdict
// parsing, single-response judging over a chat endpoint, and pairwise
// win/loss/draw comparison.
#pragma once

#include <atomic>
#include <cctype>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "ctxeval/core.hpp"
#include "ctxeval/llm_client.hpp"
#include "ctxeval/prompts.hpp"
#include "ctxeval/pruning.hpp"

namespace ctxeval {

class VerdictParseError : public Error {
 public:
  using Error::Error;
};

struct JudgeVerdict {
  std::string reason;
  int score = 0;  // always in {0..5}

  friend bool operator==(const JudgeVerdict&, const JudgeVerdict&) = default;
};

inline std::string format_verdict(const JudgeVerdict& verdict) {
  return "<reason>" + verdict.reason + "</reason>\n<score>" + std::to_string(verdict.score) +
         "</score>";
}

namespace detail {

inline std::optional<std::string> extract_tag(std::string_view text, std::string_view tag) {
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  const auto start = text.find(open);
  if (start == std::string_view::npos) return std::nullopt;
  const auto body_start = start + open.size();
  const auto end = text.find(close, body_start);
  if (end == std::string_view::npos) return std::nullopt;
  return std::string(text.substr(body_start, end - body_start));
}

}  // namespace detail

// Extracts the first <reason>/<score> pair; the score must be an integer in
// {0..5}.
inline JudgeVerdict parse_verdict(std::string_view text) {
  auto reason = detail::extract_tag(text, "reason");
  if (!reason) throw VerdictParseError("missing <reason> tag");
  auto score_text = detail::extract_tag(text, "score");
  if (!score_text) throw VerdictParseError("missing <score> tag");

  std::string trimmed(*score_text);
  while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.front()))) {
    trimmed.erase(trimmed.begin());
  }
  while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back()))) {
    trimmed.pop_back();
  }
  int score = 0;
  std::size_t consumed = 0;
  try {
    score = std::stoi(trimmed, &consumed);
  } catch (const std::exception&) {
    throw VerdictParseError("score is not an integer: '" + trimmed + "'");
  }
  if (consumed != trimmed.size()) {
    throw VerdictParseError("score is not an integer: '" + trimmed + "'");
  }
  if (score < 0 || score > 5) {
    throw VerdictParseError("score out of range [0, 5]: " + std::to_string(score));
  }
  return {*reason, score};
}

inline constexpr std::string_view kJudgeRubricHeader =
    "You are a professional dialogue critic in role-playing games. Your task is to evaluate "
    "a model-generated NPC response given a role-playing instruction and context.\n"
    "\n"
    "You must assess the response based on the following four dimensions:\n"
    "\n"
    "1. Scenario Adherence & Quest Progression\n"
    "- Does the NPC respond appropriately to the situation and task at hand?\n"
    "- Does it help move the current quest, story, or dialogue forward?\n"
    "\n"
    "2. NPC Believability & Engagement\n"
    "- Does the response feel natural, immersive, and emotionally appropriate?\n"
    "- Is the response engaging and does it maintain conversational flow?\n"
    "\n"
    "3. Persona Consistency (NPC Only)\n"
    "- Is the NPC's behavior, knowledge, and style consistent with their defined background "
    "and personality?\n"
    "- Are they saying things that fit their role, identity, and motivations?\n"
    "\n"
    "4. Dialogue Flow & Coherence\n"
    "- Is the response well-structured, logically coherent, and contextually relevant?\n";

inline constexpr std::string_view kJudgeFormatInstruction =
    "Evaluation Instructions: Output the result in XML format:\n"
    "<reason>...</reason>\n"
    "<score>[0-5]</score>";

// Rubric, episode context, candidate response, and the output-format
// instruction. The reference answer is appended only when requested and
// present (offline evaluation mode).
inline std::string build_judge_prompt(const Episode& episode, std::string_view candidate_response,
                                      bool include_reference = true) {
  std::string prompt(kJudgeRubricHeader);
  prompt += "\nContext:\n";
  prompt += format_persona_block(episode.persona);
  prompt += "\n\nDialogue:\n";
  prompt += render_dialogue(episode.messages);
  prompt += "\n\nCandidate Response:\n";
  prompt += candidate_response;
  if (include_reference && episode.reference_response) {
    prompt += "\n\nReference Response:\n";
    prompt += *episode.reference_response;
  }
  prompt += "\n\n";
  prompt += kJudgeFormatInstruction;
  return prompt;
}

struct PairwiseOutcome {
  int wins_a = 0;
  int wins_b = 0;
  int draws = 0;

  int total() const { return wins_a + wins_b + draws; }
  double win_rate_a() const { return total() == 0 ? 0.0 : 100.0 * wins_a / total(); }
  double win_rate_b() const { return total() == 0 ? 0.0 : 100.0 * wins_b / total(); }
  double draw_rate() const { return total() == 0 ? 0.0 : 100.0 * draws / total(); }
};

// Judge client: temperature-0 scoring with transport retries plus one
// re-ask when the verdict text does not parse.
class JudgeClient {
 public:
  struct JudgeCallStats {
    int transport_retries = 0;
    int reasks = 0;
  };

  explicit JudgeClient(EndpointConfig cfg, bool include_reference = true)
      : llm_(std::move(cfg)), include_reference_(include_reference) {}

  const EndpointConfig& config() const { return llm_.config(); }

  JudgeVerdict judge_response(const Episode& episode, std::string_view candidate_response,
                              JudgeCallStats* stats = nullptr) const {
    const std::string prompt = build_judge_prompt(episode, candidate_response, include_reference_);
    LlmClient::CallStats call_stats;
    const std::string first = llm_.complete(prompt, 0.0, &call_stats);
    if (stats != nullptr) stats->transport_retries += call_stats.retries;
    try {
      return parse_verdict(first);
    } catch (const VerdictParseError&) {
      // one re-ask before giving up
      if (stats != nullptr) ++stats->reasks;
      LlmClient::CallStats retry_stats;
      const std::string second = llm_.complete(prompt, 0.0, &retry_stats);
      if (stats != nullptr) stats->transport_retries += retry_stats.retries;
      return parse_verdict(second);
    }
  }

  // Scores each side independently per episode; the higher score wins.
  PairwiseOutcome pairwise_compare(std::span<const Episode> episodes,
                                   std::span<const std::string> responses_a,
                                   std::span<const std::string> responses_b) const {
    if (episodes.size() != responses_a.size() || episodes.size() != responses_b.size()) {
      throw ValidationError("response lists must align with episodes");
    }
    struct Slot {
      int score_a = 0;
      int score_b = 0;
      std::string error;
    };
    std::vector<Slot> slots(episodes.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= episodes.size()) return;
        try {
          slots[i].score_a = judge_response(episodes[i], responses_a[i]).score;
          slots[i].score_b = judge_response(episodes[i], responses_b[i]).score;
        } catch (const std::exception& e) {
          slots[i].error = e.what();
        }
      }
    };
    const std::size_t n_threads =
        std::min<std::size_t>(static_cast<std::size_t>(config().max_parallel), episodes.size());
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t + 1 < std::max<std::size_t>(n_threads, 1); ++t) {
      threads.emplace_back(worker);
    }
    worker();
    for (auto& t : threads) t.join();

    PairwiseOutcome outcome;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (!slots[i].error.empty()) {
        throw EndpointError("judging episode '" + episodes[i].id + "' failed: " + slots[i].error);
      }
      if (slots[i].score_a > slots[i].score_b) {
        ++outcome.wins_a;
      } else if (slots[i].score_b > slots[i].score_a) {
        ++outcome.wins_b;
      } else {
        ++outcome.draws;
      }
    }
    return outcome;
  }

 private:
  LlmClient llm_;
  bool include_reference_;
};

}  // namespace ctxeval
