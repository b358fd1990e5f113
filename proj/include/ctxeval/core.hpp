// Core domain types for tool-calling, persona-grounded dialogue evaluation:
// tool schemas, messages, tool calls, personas, episodes, plus the token
// counting contract and JSONL dataset IO shared by the rest of the library.
#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace ctxeval {

using json = nlohmann::ordered_json;

// ---- Errors ----

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invariant or precondition violations on domain values.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Dataset file problems; carries the offending 1-based line number when known.
class DatasetError : public Error {
 public:
  DatasetError(const std::string& msg, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// ---- UTF-8 helpers ----
// Character positions throughout the library are code points, never bytes,
// so truncation can never split a multi-byte sequence.

inline std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;  // count non-continuation bytes
  }
  return n;
}

// First `count` code points of `text` (whole string when shorter).
inline std::string_view utf8_prefix(std::string_view text, std::size_t count) {
  if (count == 0) return text.substr(0, 0);
  std::size_t seen = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
      if (seen == count) return text.substr(0, i);
      ++seen;
    }
  }
  return text;
}

// ---- Token counting ----

// Pluggable counter so budgets can later be enforced with a real subword
// vocabulary. The default is a deterministic approximation.
class TokenCounter {
 public:
  virtual ~TokenCounter() = default;
  virtual int count(std::string_view text) const = 0;
};

// ceil(code_points / 4): a rough stand-in for common subword tokenizers.
class HeuristicTokenCounter final : public TokenCounter {
 public:
  int count(std::string_view text) const override {
    return static_cast<int>((utf8_length(text) + 3) / 4);
  }
};

inline const TokenCounter& default_token_counter() {
  static const HeuristicTokenCounter counter;
  return counter;
}

inline int count_tokens(std::string_view text,
                        const TokenCounter& counter = default_token_counter()) {
  return counter.count(text);
}

// Flat per-message charge covering role markers and chat-format framing.
inline constexpr int kMessageOverheadTokens = 4;

// ---- Tool schemas ----

enum class ParamKind { String, Integer, Number, Boolean, Enum, Array };

inline std::string_view to_string(ParamKind kind) {
  switch (kind) {
    case ParamKind::String: return "string";
    case ParamKind::Integer: return "integer";
    case ParamKind::Number: return "number";
    case ParamKind::Boolean: return "boolean";
    case ParamKind::Enum: return "enum";
    case ParamKind::Array: return "array";
  }
  throw ValidationError("unknown parameter kind");
}

inline ParamKind param_kind_from_string(std::string_view s) {
  if (s == "string") return ParamKind::String;
  if (s == "integer") return ParamKind::Integer;
  if (s == "number") return ParamKind::Number;
  if (s == "boolean") return ParamKind::Boolean;
  if (s == "enum") return ParamKind::Enum;
  if (s == "array") return ParamKind::Array;
  throw ValidationError("unknown parameter kind: " + std::string(s));
}

struct ParamSchema {
  ParamKind kind = ParamKind::String;
  std::vector<std::string> allowed_values;  // non-empty iff kind == Enum
  bool required = false;

  void validate() const {
    if ((kind == ParamKind::Enum) != !allowed_values.empty()) {
      throw ValidationError("allowed_values must be non-empty exactly for enum parameters");
    }
  }

  friend bool operator==(const ParamSchema&, const ParamSchema&) = default;
};

struct ToolParam {
  std::string name;
  ParamSchema schema;

  friend bool operator==(const ToolParam&, const ToolParam&) = default;
};

struct ToolSpec {
  std::string name;
  std::string description;
  std::vector<ToolParam> parameters;  // insertion-ordered, names unique

  const ParamSchema* find_param(std::string_view param_name) const {
    for (const auto& p : parameters) {
      if (p.name == param_name) return &p.schema;
    }
    return nullptr;
  }

  void validate() const {
    if (name.empty()) throw ValidationError("tool name must be non-empty");
    for (std::size_t i = 0; i < parameters.size(); ++i) {
      parameters[i].schema.validate();
      for (std::size_t j = i + 1; j < parameters.size(); ++j) {
        if (parameters[i].name == parameters[j].name) {
          throw ValidationError("duplicate parameter '" + parameters[i].name +
                                "' in tool '" + name + "'");
        }
      }
    }
  }

  friend bool operator==(const ToolSpec&, const ToolSpec&) = default;
};

// ---- Tool calls ----

// Canonical form: argument keys sorted lexicographically (std::map order),
// so canonically equal calls compare equal with operator==.
struct ToolCall {
  std::string function_name;
  std::map<std::string, json> arguments;

  friend bool operator==(const ToolCall&, const ToolCall&) = default;
  friend bool operator<(const ToolCall& a, const ToolCall& b) {
    if (a.function_name != b.function_name) return a.function_name < b.function_name;
    return a.arguments < b.arguments;
  }
};

inline json tool_call_to_json(const ToolCall& call) {
  json args = json::object();
  for (const auto& [k, v] : call.arguments) args[k] = v;
  return json{{"name", call.function_name}, {"arguments", std::move(args)}};
}

inline ToolCall tool_call_from_json(const json& j) {
  if (!j.is_object() || !j.contains("name") || !j["name"].is_string() ||
      !j.contains("arguments") || !j["arguments"].is_object()) {
    throw ValidationError("tool call must be an object with string 'name' and object 'arguments'");
  }
  ToolCall call;
  call.function_name = j["name"].get<std::string>();
  for (const auto& [k, v] : j["arguments"].items()) call.arguments[k] = v;
  return call;
}

// ---- Messages ----

enum class Role { System, User, Assistant, Tool };

inline std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    case Role::Tool: return "tool";
  }
  throw ValidationError("unknown role");
}

inline Role role_from_string(std::string_view s) {
  if (s == "system") return Role::System;
  if (s == "user") return Role::User;
  if (s == "assistant") return Role::Assistant;
  if (s == "tool") return Role::Tool;
  throw ValidationError("unknown role: " + std::string(s));
}

struct Message {
  Role role = Role::User;
  std::string content;
  std::vector<ToolCall> tool_calls;  // only meaningful on assistant messages

  void validate() const {
    if (!tool_calls.empty() && role != Role::Assistant) {
      throw ValidationError("tool_calls are only allowed on assistant messages");
    }
  }

  friend bool operator==(const Message&, const Message&) = default;
};

// ---- Persona ----

// The five persona fields in fixed salience order; index 0 is truncated
// first under distillation, index 4 last.
struct PersonaComponents {
  std::string state;
  std::string role;
  std::string worldview;
  std::string knowledge;
  std::string npc_info;

  static constexpr std::size_t kFieldCount = 5;
  static constexpr std::array<std::string_view, kFieldCount> kSalienceOrder = {
      "state", "role", "worldview", "knowledge", "npc_info"};

  const std::string& field(std::size_t index) const {
    switch (index) {
      case 0: return state;
      case 1: return role;
      case 2: return worldview;
      case 3: return knowledge;
      case 4: return npc_info;
    }
    throw ValidationError("persona field index out of range");
  }

  std::string& field(std::size_t index) {
    return const_cast<std::string&>(std::as_const(*this).field(index));
  }

  friend bool operator==(const PersonaComponents&, const PersonaComponents&) = default;
};

// ---- Budgets ----

struct TokenBudget {
  int input_limit = 2000;
  int output_limit = 200;

  void validate() const {
    if (input_limit <= 0 || output_limit <= 0) {
      throw ValidationError("token budget limits must be strictly positive");
    }
  }

  friend bool operator==(const TokenBudget&, const TokenBudget&) = default;
};

// ---- Knowledge base ----

struct ItemRecord {
  std::string display_name;
  bool equipped = false;
  std::map<std::string, json> attributes;

  friend bool operator==(const ItemRecord&, const ItemRecord&) = default;
};

struct KnowledgeBase {
  std::map<std::string, ItemRecord> items;  // keyed by item id

  // Resolve by id first, then by case-folded display name.
  const ItemRecord* lookup(std::string_view ref) const {
    auto it = items.find(std::string(ref));
    if (it != items.end()) return &it->second;
    std::string folded = fold(ref);
    for (const auto& [id, record] : items) {
      if (fold(record.display_name) == folded) return &record;
    }
    return nullptr;
  }

  static std::string fold(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
  }

  friend bool operator==(const KnowledgeBase&, const KnowledgeBase&) = default;
};

// ---- Episodes ----

struct Episode {
  std::string id;
  PersonaComponents persona;
  std::vector<ToolSpec> tools;
  std::vector<Message> messages;
  std::vector<ToolCall> gold_tool_calls;
  std::optional<std::string> reference_response;
  std::optional<KnowledgeBase> knowledge_base;

  void validate() const {
    if (id.empty()) throw ValidationError("episode id must be non-empty");
    if (messages.empty()) throw ValidationError("episode messages must be non-empty");
    for (const auto& t : tools) t.validate();
    for (const auto& m : messages) m.validate();
  }

  friend bool operator==(const Episode&, const Episode&) = default;
};

// ---- Countable serialization ----

// Literal delimiters for tool-call blocks in model output and prompts.
inline constexpr std::string_view kToolCallOpenTag = "<tool_call>";
inline constexpr std::string_view kToolCallCloseTag = "</tool_call>";

inline std::string format_tool_call_block(const ToolCall& call) {
  return std::string(kToolCallOpenTag) + tool_call_to_json(call).dump() +
         std::string(kToolCallCloseTag);
}

// Stable JSON rendering of a tool; this exact text is what the token
// counter charges for the tool and what prompts embed as function info.
inline std::string render_tool_schema(const ToolSpec& tool) {
  json params = json::object();
  for (const auto& p : tool.parameters) {
    json schema{{"type", std::string(to_string(p.schema.kind))},
                {"required", p.schema.required}};
    if (!p.schema.allowed_values.empty()) schema["enum"] = p.schema.allowed_values;
    params[p.name] = std::move(schema);
  }
  json j{{"name", tool.name}, {"description", tool.description}, {"parameters", std::move(params)}};
  return j.dump();
}

// Sum of: per message, kMessageOverheadTokens + tokens(content) + tokens of
// each tool call rendered as a <tool_call> block; per tool,
// tokens(render_tool_schema); plus tokens of the persona prompt when given.
// Empty context counts zero.
inline int count_context_tokens(std::span<const Message> messages,
                                std::span<const ToolSpec> tools,
                                std::optional<std::string_view> persona_prompt = std::nullopt,
                                const TokenCounter& counter = default_token_counter()) {
  int total = 0;
  for (const auto& m : messages) {
    total += kMessageOverheadTokens;
    total += counter.count(m.content);
    for (const auto& call : m.tool_calls) {
      total += counter.count(format_tool_call_block(call));
    }
  }
  for (const auto& t : tools) {
    total += counter.count(render_tool_schema(t));
  }
  if (persona_prompt) total += counter.count(*persona_prompt);
  return total;
}

// ---- JSON (de)serialization ----

inline json param_schema_to_json(const ParamSchema& schema) {
  json j{{"type", std::string(to_string(schema.kind))}, {"required", schema.required}};
  if (!schema.allowed_values.empty()) j["enum"] = schema.allowed_values;
  return j;
}

inline ParamSchema param_schema_from_json(const json& j) {
  ParamSchema schema;
  schema.kind = param_kind_from_string(j.at("type").get<std::string>());
  schema.required = j.value("required", false);
  if (j.contains("enum")) schema.allowed_values = j["enum"].get<std::vector<std::string>>();
  schema.validate();
  return schema;
}

inline json tool_spec_to_json(const ToolSpec& tool) {
  json params = json::object();
  for (const auto& p : tool.parameters) params[p.name] = param_schema_to_json(p.schema);
  return json{{"name", tool.name}, {"description", tool.description}, {"parameters", std::move(params)}};
}

inline ToolSpec tool_spec_from_json(const json& j) {
  ToolSpec tool;
  tool.name = j.at("name").get<std::string>();
  tool.description = j.value("description", "");
  if (j.contains("parameters")) {
    for (const auto& [name, schema] : j["parameters"].items()) {
      tool.parameters.push_back({name, param_schema_from_json(schema)});
    }
  }
  tool.validate();
  return tool;
}

inline json message_to_json(const Message& m) {
  json j{{"role", std::string(to_string(m.role))}, {"content", m.content}};
  if (!m.tool_calls.empty()) {
    json calls = json::array();
    for (const auto& c : m.tool_calls) calls.push_back(tool_call_to_json(c));
    j["tool_calls"] = std::move(calls);
  }
  return j;
}

inline Message message_from_json(const json& j) {
  Message m;
  m.role = role_from_string(j.at("role").get<std::string>());
  m.content = j.value("content", "");
  if (j.contains("tool_calls")) {
    for (const auto& c : j["tool_calls"]) m.tool_calls.push_back(tool_call_from_json(c));
  }
  m.validate();
  return m;
}

inline json persona_to_json(const PersonaComponents& p) {
  return json{{"state", p.state},
              {"role", p.role},
              {"worldview", p.worldview},
              {"knowledge", p.knowledge},
              {"npc_info", p.npc_info}};
}

inline PersonaComponents persona_from_json(const json& j) {
  PersonaComponents p;
  p.state = j.value("state", "");
  p.role = j.value("role", "");
  p.worldview = j.value("worldview", "");
  p.knowledge = j.value("knowledge", "");
  p.npc_info = j.value("npc_info", "");
  return p;
}

inline json knowledge_base_to_json(const KnowledgeBase& kb) {
  json items = json::object();
  for (const auto& [id, record] : kb.items) {
    json attrs = json::object();
    for (const auto& [k, v] : record.attributes) attrs[k] = v;
    items[id] = json{{"display_name", record.display_name},
                     {"equipped", record.equipped},
                     {"attributes", std::move(attrs)}};
  }
  return json{{"items", std::move(items)}};
}

inline KnowledgeBase knowledge_base_from_json(const json& j) {
  KnowledgeBase kb;
  if (!j.contains("items")) return kb;
  for (const auto& [id, rec] : j["items"].items()) {
    ItemRecord record;
    record.display_name = rec.value("display_name", id);
    record.equipped = rec.value("equipped", false);
    if (rec.contains("attributes")) {
      for (const auto& [k, v] : rec["attributes"].items()) record.attributes[k] = v;
    }
    kb.items[id] = std::move(record);
  }
  return kb;
}

inline json episode_to_json(const Episode& e) {
  json tools = json::array();
  for (const auto& t : e.tools) tools.push_back(tool_spec_to_json(t));
  json messages = json::array();
  for (const auto& m : e.messages) messages.push_back(message_to_json(m));
  json gold = json::array();
  for (const auto& c : e.gold_tool_calls) gold.push_back(tool_call_to_json(c));
  json j{{"id", e.id},
         {"persona", persona_to_json(e.persona)},
         {"tools", std::move(tools)},
         {"messages", std::move(messages)},
         {"gold_tool_calls", std::move(gold)}};
  if (e.reference_response) j["reference_response"] = *e.reference_response;
  if (e.knowledge_base) j["knowledge_base"] = knowledge_base_to_json(*e.knowledge_base);
  return j;
}

inline Episode episode_from_json(const json& j) {
  Episode e;
  e.id = j.at("id").get<std::string>();
  if (j.contains("persona")) e.persona = persona_from_json(j["persona"]);
  if (j.contains("tools")) {
    for (const auto& t : j["tools"]) e.tools.push_back(tool_spec_from_json(t));
  }
  if (j.contains("messages")) {
    for (const auto& m : j["messages"]) e.messages.push_back(message_from_json(m));
  }
  if (j.contains("gold_tool_calls")) {
    for (const auto& c : j["gold_tool_calls"]) e.gold_tool_calls.push_back(tool_call_from_json(c));
  }
  if (j.contains("reference_response") && !j["reference_response"].is_null()) {
    e.reference_response = j["reference_response"].get<std::string>();
  }
  if (j.contains("knowledge_base") && !j["knowledge_base"].is_null()) {
    e.knowledge_base = knowledge_base_from_json(j["knowledge_base"]);
  }
  e.validate();
  return e;
}

// ---- Dataset IO ----

// One episode object per line, UTF-8. Order-preserving; ids must be unique.
inline std::vector<Episode> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset file: " + path.string());
  std::vector<Episode> episodes;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DatasetError("malformed JSON", line_no);
    Episode episode;
    try {
      episode = episode_from_json(j);
    } catch (const std::exception& e) {
      throw DatasetError(e.what(), line_no);
    }
    for (const auto& existing : episodes) {
      if (existing.id == episode.id) {
        throw DatasetError("duplicate episode id '" + episode.id + "'", line_no);
      }
    }
    episodes.push_back(std::move(episode));
  }
  return episodes;
}

inline void save_dataset(const std::filesystem::path& path, std::span<const Episode> episodes) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot open dataset file for writing: " + path.string());
  for (const auto& e : episodes) out << episode_to_json(e).dump() << '\n';
}

}  // namespace ctxeval
