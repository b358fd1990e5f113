// Prompt template assets and byte-stable renderers.
//
// Templates are versioned text constants with named {slot} markers:
//   task1: {function_info}, {dialogue}
//   task2: {character_settings}, {function_knowledge}, {item_knowledge}
// Rendering replaces each marker with caller-supplied text and performs no
// other transformation, so output bytes are stable across runs.
#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>

#include "ctxeval/core.hpp"

namespace ctxeval {

inline constexpr std::string_view kPromptTemplateVersion = "1";

inline constexpr std::string_view kTask1PromptTemplate =
    "You are an assistant in estimating function names and arguments given some dialogues "
    "in a video game world. You will need the following information to respond to the user's input.\n"
    "\n"
    "Steps:\n"
    "1. Read the dialogue and the target item.\n"
    "2. From the given function information, select the functions that can obtain the information you need.\n"
    "3. Fill in the arguments needed by the function as appropriate.\n"
    "\n"
    "Note: You may select multiple functions or no functions at all.\n"
    "\n"
    "Additional Information:\n"
    "{function_info}\n"
    "\n"
    "Dialogue: The user input for the current turn is as follows.\n"
    "{dialogue}";

inline constexpr std::string_view kTask2PromptTemplate =
    "You are an assistant that plays the role of a character in a video game. "
    "Use the following character settings and knowledge to create your response.\n"
    "\n"
    "Character Settings:\n"
    "{character_settings}\n"
    "\n"
    "Knowledge:\n"
    "- Knowledge from Function Calls: {function_knowledge}\n"
    "- General Knowledge of All Items: {item_knowledge}\n"
    "\n"
    "Dialogue:\n"
    "{dialogue}";

// Replaces {name} markers with their values; unknown markers stay literal.
inline std::string render_template(std::string_view tmpl,
                                   const std::map<std::string, std::string>& slots) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const std::size_t open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    const std::size_t close = tmpl.find('}', open + 1);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const std::string key(tmpl.substr(open + 1, close - open - 1));
    auto it = slots.find(key);
    if (it != slots.end()) {
      out.append(it->second);
    } else {
      out.append(tmpl.substr(open, close - open + 1));
    }
    pos = close + 1;
  }
  return out;
}

// One "role: content" line per message; assistant tool calls follow on their
// own lines as <tool_call> blocks.
inline std::string render_dialogue(std::span<const Message> messages) {
  std::string out;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (i > 0) out += "\n";
    out += std::string(to_string(messages[i].role)) + ": " + messages[i].content;
    for (const auto& call : messages[i].tool_calls) {
      out += "\n" + format_tool_call_block(call);
    }
  }
  return out;
}

// One line per tool, in toolset order, using the countable serialization.
inline std::string render_function_info(std::span<const ToolSpec> tools) {
  std::string out;
  for (std::size_t i = 0; i < tools.size(); ++i) {
    if (i > 0) out += "\n";
    out += render_tool_schema(tools[i]);
  }
  return out;
}

// "- id: display name" per item, map-ordered; equipped items are marked.
inline std::string render_item_knowledge(const std::optional<KnowledgeBase>& kb) {
  if (!kb) return "";
  std::string out;
  bool first = true;
  for (const auto& [id, record] : kb->items) {
    if (!first) out += "\n";
    first = false;
    out += "- " + id + ": " + record.display_name;
    if (record.equipped) out += " [equipped]";
  }
  return out;
}

inline std::string render_task1_prompt(const Episode& episode,
                                       std::span<const ToolSpec> pruned_tools) {
  return render_template(kTask1PromptTemplate,
                         {{"function_info", render_function_info(pruned_tools)},
                          {"dialogue", render_dialogue(episode.messages)}});
}

inline std::string render_task2_prompt(const Episode& episode,
                                       std::string_view distilled_persona,
                                       std::string_view function_results) {
  return render_template(kTask2PromptTemplate,
                         {{"character_settings", std::string(distilled_persona)},
                          {"function_knowledge", std::string(function_results)},
                          {"item_knowledge", render_item_knowledge(episode.knowledge_base)},
                          {"dialogue", render_dialogue(episode.messages)}});
}

}  // namespace ctxeval
