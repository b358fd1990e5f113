// Budget-driven context compression: three-stage adaptive toolset pruning
// (relevance reorder, bounded removal, per-pass description truncation) and
// salience-ordered persona distillation with automatic level selection.
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ctxeval/core.hpp"

namespace ctxeval {

// ---- Relevance scoring ----

struct RelevanceScore {
  std::string tool_name;
  double score = 0.0;
  std::size_t original_index = 0;  // tie-break: ascending
};

namespace detail {

inline std::string fold_case(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Case-folded alphanumeric runs; punctuation and '_' act as separators.
inline std::vector<std::string> split_query_terms(std::string_view query) {
  std::vector<std::string> terms;
  std::string current;
  for (unsigned char c : query) {
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      terms.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) terms.push_back(std::move(current));
  return terms;
}

}  // namespace detail

// Weighted lexical overlap with the query: each query term scores 2 when it
// occurs in the tool name, else 1 when it occurs in the description.
inline RelevanceScore score_relevance(const ToolSpec& tool, std::string_view query,
                                      std::size_t original_index = 0) {
  const std::string name = detail::fold_case(tool.name);
  const std::string description = detail::fold_case(tool.description);
  double score = 0.0;
  for (const auto& term : detail::split_query_terms(query)) {
    if (name.find(term) != std::string::npos) {
      score += 2.0;
    } else if (description.find(term) != std::string::npos) {
      score += 1.0;
    }
  }
  return {tool.name, score, original_index};
}

// Descending score; equal scores keep their original relative order.
inline std::vector<ToolSpec> sort_by_relevance(std::vector<ToolSpec> tools,
                                               std::string_view query) {
  std::vector<RelevanceScore> scores;
  scores.reserve(tools.size());
  for (std::size_t i = 0; i < tools.size(); ++i) {
    scores.push_back(score_relevance(tools[i], query, i));
  }
  std::vector<std::size_t> order(tools.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a].score != scores[b].score) return scores[a].score > scores[b].score;
    return scores[a].original_index < scores[b].original_index;
  });
  std::vector<ToolSpec> sorted;
  sorted.reserve(tools.size());
  for (std::size_t idx : order) sorted.push_back(std::move(tools[idx]));
  return sorted;
}

// ---- Query extraction ----

inline std::string extract_last_user_query(std::span<const Message> messages) {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == Role::User) return it->content;
  }
  throw ValidationError("no user message in history");
}

// ---- Description truncation ----

// Drops the trailing ceil(fraction * length) code points.
inline std::string truncate_description(std::string_view text, double fraction) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw ValidationError("truncation fraction must be in (0, 1]");
  }
  const std::size_t length = utf8_length(text);
  if (length == 0) return "";
  const auto removed = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(length)));
  const std::size_t kept = removed >= length ? 0 : length - removed;
  return std::string(utf8_prefix(text, kept));
}

// ---- Toolset pruning ----

struct PruneReport {
  std::vector<std::string> removed_tools;  // at most 3, in removal order
  int truncation_passes = 0;
  int final_tokens = 0;
  bool floor_reached = false;          // budget still exceeded with all descriptions empty
  std::vector<int> stage_tokens;       // token count at every budget check, in order
};

// Cascade: early return when the context already fits, then relevance
// reordering, then up to three removals of the lowest-ranked tool, then
// repeated 10%-per-pass description truncation. Runs out of material rather
// than failing: floor_reached marks results still over budget.
inline std::pair<std::vector<ToolSpec>, PruneReport> prune_toolset(
    std::span<const Message> messages, std::vector<ToolSpec> tools,
    const TokenBudget& budget, const TokenCounter& counter = default_token_counter()) {
  budget.validate();
  PruneReport report;
  auto measure = [&]() {
    int tokens = count_context_tokens(messages, tools, std::nullopt, counter);
    report.stage_tokens.push_back(tokens);
    report.final_tokens = tokens;
    return tokens;
  };

  if (measure() <= budget.input_limit) {
    return {std::move(tools), std::move(report)};
  }

  // Stage 1: relevance-based reordering
  std::string query;
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == Role::User) {
      query = it->content;
      break;
    }
  }
  tools = sort_by_relevance(std::move(tools), query);
  if (measure() <= budget.input_limit) {
    return {std::move(tools), std::move(report)};
  }

  // Stage 2: iterative pruning, bounded at three removals
  for (int i = 0; i < 3 && !tools.empty(); ++i) {
    report.removed_tools.push_back(tools.back().name);
    tools.pop_back();
    if (measure() <= budget.input_limit) {
      return {std::move(tools), std::move(report)};
    }
  }

  // Stage 3: description truncation until the budget holds or nothing is left
  while (true) {
    bool any_description = false;
    for (const auto& t : tools) {
      if (!t.description.empty()) {
        any_description = true;
        break;
      }
    }
    if (!any_description) {
      report.floor_reached = true;
      return {std::move(tools), std::move(report)};
    }
    for (auto& t : tools) {
      if (!t.description.empty()) t.description = truncate_description(t.description, 0.10);
    }
    ++report.truncation_passes;
    if (measure() <= budget.input_limit) {
      return {std::move(tools), std::move(report)};
    }
  }
}

// ---- Persona distillation ----

inline constexpr int kMaxReductionLevel = 5;

namespace detail {

// Retention per salience position k (1-based): 0.75, 0.50, 0.25, 0, 0.
inline double retention_fraction(int salience_position) {
  return std::max(0.0, 1.0 - 0.25 * salience_position);
}

// Keeps roughly `retention` of the text, cutting at the nearest preceding
// sentence boundary; falls back to a plain character cut.
inline std::string truncate_to_retention(std::string_view text, double retention) {
  if (retention <= 0.0) return "";
  const std::size_t length = utf8_length(text);
  if (retention >= 1.0 || length == 0) return std::string(text);
  const auto target = static_cast<std::size_t>(std::floor(retention * static_cast<double>(length)));
  if (target == 0) return "";

  std::size_t best_boundary = 0;
  std::size_t cp_index = 0;
  char prev = '\0';
  for (unsigned char byte : text) {
    if ((byte & 0xC0) != 0x80) {
      if (cp_index > target) break;
      if (prev == '.' || prev == '!' || prev == '?' || prev == '\n') {
        best_boundary = cp_index;  // cut right after the sentence end
      }
      prev = static_cast<char>(byte);
      ++cp_index;
    }
  }
  const std::size_t cut = best_boundary > 0 ? best_boundary : target;
  return std::string(utf8_prefix(text, cut));
}

}  // namespace detail

// Formatted persona block; the labeled fields appear in salience order.
inline std::string format_persona_block(const PersonaComponents& c) {
  std::string out;
  out += "State: " + c.state + "\n";
  out += "Role: " + c.role + "\n";
  out += "Worldview: " + c.worldview + "\n";
  out += "Knowledge: " + c.knowledge + "\n";
  out += "NPC Info: " + c.npc_info;
  return out;
}

// Level L truncates the first L fields of the salience order, each to its
// position's retention fraction; level 0 keeps everything verbatim.
inline std::string distill_persona(const PersonaComponents& components, int level) {
  if (level < 0 || level > kMaxReductionLevel) {
    throw ValidationError("reduction level must be in [0, 5]");
  }
  PersonaComponents distilled = components;
  for (int k = 1; k <= level; ++k) {
    auto& field = distilled.field(static_cast<std::size_t>(k - 1));
    field = detail::truncate_to_retention(field, detail::retention_fraction(k));
  }
  return format_persona_block(distilled);
}

// Smallest level whose distilled persona fits alongside messages and tools;
// 5 when even the most aggressive distillation does not fit.
inline int select_reduction_level(const PersonaComponents& components,
                                  std::span<const Message> messages,
                                  std::span<const ToolSpec> tools,
                                  const TokenBudget& budget,
                                  const TokenCounter& counter = default_token_counter()) {
  budget.validate();
  for (int level = 0; level < kMaxReductionLevel; ++level) {
    const std::string persona = distill_persona(components, level);
    if (count_context_tokens(messages, tools, persona, counter) <= budget.input_limit) {
      return level;
    }
  }
  return kMaxReductionLevel;
}

}  // namespace ctxeval
