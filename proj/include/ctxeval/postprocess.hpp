// Tool-call repair: parameter normalization (type coercion, canonical
// comparison phrases, operator splitting and inference) and function merging
// (deduplication, array-union consolidation, conflict and knowledge-base
// filtering). Drops are reported, never raised.
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ctxeval/core.hpp"

namespace ctxeval {

// Raised when a required parameter's value cannot be losslessly coerced.
class CoercionError : public Error {
 public:
  CoercionError(const std::string& parameter, const std::string& detail)
      : Error("parameter '" + parameter + "': " + detail), parameter_(parameter) {}
  const std::string& parameter() const { return parameter_; }

 private:
  std::string parameter_;
};

// ---- Canonicalization rules ----

struct NormalizationRule {
  std::string pattern;      // literal comparison symbol
  std::string replacement;  // canonical phrase
};

inline const std::vector<NormalizationRule>& default_normalization_rules() {
  static const std::vector<NormalizationRule> rules{
      {">=", "at least"}, {"<=", "at most"}, {">", "more than"},
      {"<", "less than"}, {"=", "equal to"},
  };
  return rules;
}

// The table must be bijective: no duplicate patterns, no duplicate phrases.
inline void validate_normalization_rules(const std::vector<NormalizationRule>& rules) {
  for (std::size_t i = 0; i < rules.size(); ++i) {
    for (std::size_t j = i + 1; j < rules.size(); ++j) {
      if (rules[i].pattern == rules[j].pattern || rules[i].replacement == rules[j].replacement) {
        throw ValidationError("normalization rules must map distinct patterns to distinct phrases");
      }
    }
  }
}

// ---- Toolset annotations ----

inline constexpr std::string_view kDisposalTag = "disposal";
inline constexpr std::string_view kCheckTag = "check";

// Per-toolset configuration annex: which functions are disposal/check
// actions and which argument names hold item references.
struct ToolsetAnnotations {
  std::map<std::string, std::string> function_tags;
  std::set<std::string> item_reference_arguments;

  bool is_disposal(std::string_view function_name) const {
    auto it = function_tags.find(std::string(function_name));
    return it != function_tags.end() && it->second == kDisposalTag;
  }
  bool is_item_reference(std::string_view argument_name) const {
    return item_reference_arguments.count(std::string(argument_name)) > 0;
  }
};

inline ToolsetAnnotations annotations_from_json(const json& j) {
  ToolsetAnnotations a;
  if (j.contains("function_tags")) {
    for (const auto& [name, tag] : j["function_tags"].items()) {
      a.function_tags[name] = tag.get<std::string>();
    }
  }
  if (j.contains("item_reference_arguments")) {
    for (const auto& arg : j["item_reference_arguments"]) {
      a.item_reference_arguments.insert(arg.get<std::string>());
    }
  }
  return a;
}

inline json annotations_to_json(const ToolsetAnnotations& a) {
  json tags = json::object();
  for (const auto& [name, tag] : a.function_tags) tags[name] = tag;
  json args = json::array();
  for (const auto& arg : a.item_reference_arguments) args.push_back(arg);
  return json{{"function_tags", std::move(tags)}, {"item_reference_arguments", std::move(args)}};
}

inline ToolsetAnnotations load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open annotations file: " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DatasetError("malformed annotations JSON: " + path.string());
  return annotations_from_json(j);
}

// ---- Reports ----

struct DroppedCall {
  ToolCall call;
  std::string reason;  // always non-empty
};

struct MergedGroup {
  std::vector<ToolCall> inputs;
  ToolCall output;
};

struct PostprocessReport {
  std::vector<DroppedCall> dropped_calls;
  std::vector<MergedGroup> merged_groups;
  int coercions = 0;
};

// ---- Normalization internals ----

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Lossless coercion of a scalar to the declared kind; nullopt when impossible.
inline std::optional<json> coerce_scalar(const json& value, const ParamSchema& schema) {
  switch (schema.kind) {
    case ParamKind::String:
      if (value.is_string()) return value;
      if (value.is_number_integer()) return json(std::to_string(value.get<long long>()));
      if (value.is_boolean()) return json(value.get<bool>() ? "true" : "false");
      if (value.is_number_float()) return json(value.dump());
      return std::nullopt;
    case ParamKind::Integer: {
      if (value.is_number_integer()) return value;
      if (value.is_number_float()) {
        double d = value.get<double>();
        auto i = static_cast<long long>(d);
        if (static_cast<double>(i) == d) return json(i);
        return std::nullopt;
      }
      if (value.is_string()) {
        const std::string s(trim(value.get<std::string>()));
        if (s.empty()) return std::nullopt;
        std::size_t consumed = 0;
        try {
          long long i = std::stoll(s, &consumed);
          if (consumed == s.size()) return json(i);
        } catch (const std::exception&) {
        }
        return std::nullopt;
      }
      return std::nullopt;
    }
    case ParamKind::Number: {
      if (value.is_number()) return value;
      if (value.is_string()) {
        const std::string s(trim(value.get<std::string>()));
        if (s.empty()) return std::nullopt;
        std::size_t consumed = 0;
        try {
          double d = std::stod(s, &consumed);
          if (consumed == s.size()) return json(d);
        } catch (const std::exception&) {
        }
        return std::nullopt;
      }
      return std::nullopt;
    }
    case ParamKind::Boolean: {
      if (value.is_boolean()) return value;
      if (value.is_string()) {
        const std::string s = KnowledgeBase::fold(trim(value.get<std::string>()));
        if (s == "true") return json(true);
        if (s == "false") return json(false);
      }
      return std::nullopt;
    }
    case ParamKind::Enum: {
      if (!value.is_string()) return std::nullopt;
      const std::string folded = KnowledgeBase::fold(trim(value.get<std::string>()));
      for (const auto& allowed : schema.allowed_values) {
        if (KnowledgeBase::fold(allowed) == folded) return json(allowed);
      }
      return std::nullopt;
    }
    case ParamKind::Array: {
      if (value.is_array()) return value;
      if (value.is_object()) return std::nullopt;
      return json::array({value});  // lone scalar becomes a one-element list
    }
  }
  return std::nullopt;
}

// The schema's operator slot: a parameter literally named "operator", or an
// enum parameter whose allowed values include a canonical phrase.
inline const ToolParam* find_operator_param(const ToolSpec& schema,
                                            const std::vector<NormalizationRule>& rules) {
  for (const auto& p : schema.parameters) {
    if (p.name == "operator") return &p;
  }
  for (const auto& p : schema.parameters) {
    if (p.schema.kind != ParamKind::Enum) continue;
    for (const auto& allowed : p.schema.allowed_values) {
      for (const auto& rule : rules) {
        if (KnowledgeBase::fold(allowed) == KnowledgeBase::fold(rule.replacement)) return &p;
      }
    }
  }
  return nullptr;
}

inline bool phrase_allowed(const ParamSchema& schema, const std::string& phrase) {
  if (schema.kind != ParamKind::Enum) return true;
  for (const auto& allowed : schema.allowed_values) {
    if (KnowledgeBase::fold(allowed) == KnowledgeBase::fold(phrase)) return true;
  }
  return false;
}

// Matches a leading comparison symbol or canonical phrase; returns the
// canonical phrase and the remainder. Longest candidates win.
inline std::optional<std::pair<std::string, std::string>> match_leading_operator(
    std::string_view text, const std::vector<NormalizationRule>& rules) {
  std::vector<std::pair<std::string, std::string>> candidates;  // literal -> phrase
  for (const auto& rule : rules) {
    candidates.emplace_back(rule.pattern, rule.replacement);
    candidates.emplace_back(rule.replacement, rule.replacement);
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
  const std::string folded = KnowledgeBase::fold(text);
  for (const auto& [literal, phrase] : candidates) {
    const std::string folded_literal = KnowledgeBase::fold(literal);
    if (folded.size() > folded_literal.size() &&
        folded.compare(0, folded_literal.size(), folded_literal) == 0) {
      std::string remainder(trim(text.substr(literal.size())));
      if (!remainder.empty()) return std::make_pair(phrase, remainder);
    }
  }
  return std::nullopt;
}

}  // namespace detail

// ---- Operations ----

// Type coercion, canonical comparison phrases, operator splitting, and
// operator inference from the user query. Idempotent; never overrides an
// explicitly provided argument.
inline ToolCall normalize_parameters(const ToolCall& call, const ToolSpec& schema,
                                     std::string_view user_query,
                                     const std::vector<NormalizationRule>& rules =
                                         default_normalization_rules(),
                                     int* coercion_count = nullptr) {
  if (call.function_name != schema.name) {
    throw ValidationError("call '" + call.function_name + "' does not match schema '" +
                          schema.name + "'");
  }
  validate_normalization_rules(rules);
  ToolCall out;
  out.function_name = call.function_name;
  int coercions = 0;
  const ToolParam* op_param = detail::find_operator_param(schema, rules);

  for (const auto& [name, original] : call.arguments) {
    json value = original;
    const ParamSchema* param = schema.find_param(name);

    if (value.is_string()) {
      const std::string_view trimmed = detail::trim(value.get_ref<const std::string&>());
      // exact comparison symbol -> canonical phrase
      bool replaced = false;
      for (const auto& rule : rules) {
        if (trimmed == rule.pattern) {
          value = json(rule.replacement);
          replaced = true;
          break;
        }
      }
      // compound "more than 5" splits into operator + value when the schema
      // declares a separate operator slot
      if (!replaced && op_param != nullptr && op_param->name != name &&
          call.arguments.find(op_param->name) == call.arguments.end() &&
          out.arguments.find(op_param->name) == out.arguments.end()) {
        if (auto split = detail::match_leading_operator(trimmed, rules)) {
          const auto& [phrase, remainder] = *split;
          json remainder_value = json(remainder);
          if (param != nullptr) {
            auto coerced = detail::coerce_scalar(remainder_value, *param);
            if (coerced && detail::phrase_allowed(op_param->schema, phrase)) {
              out.arguments[op_param->name] =
                  detail::coerce_scalar(json(phrase), op_param->schema).value_or(json(phrase));
              value = *coerced;
            }
          }
        }
      }
    }

    if (param != nullptr) {
      auto coerced = detail::coerce_scalar(value, *param);
      if (coerced) {
        value = *coerced;
      } else if (param->required) {
        throw CoercionError(name, "cannot coerce " + value.dump() + " to " +
                                      std::string(to_string(param->kind)));
      }
    }
    if (value.dump() != original.dump()) ++coercions;
    out.arguments[name] = std::move(value);
  }

  // operator inference: fill a missing operator argument when exactly one
  // canonical phrase occurs in the user query
  if (op_param != nullptr && out.arguments.find(op_param->name) == out.arguments.end()) {
    const std::string folded_query = KnowledgeBase::fold(user_query);
    std::string inferred;
    int distinct = 0;
    for (const auto& rule : rules) {
      if (folded_query.find(KnowledgeBase::fold(rule.replacement)) != std::string::npos) {
        ++distinct;
        inferred = rule.replacement;
      }
    }
    if (distinct == 1 && detail::phrase_allowed(op_param->schema, inferred)) {
      out.arguments[op_param->name] =
          detail::coerce_scalar(json(inferred), op_param->schema).value_or(json(inferred));
      ++coercions;
    }
  }

  if (coercion_count != nullptr) *coercion_count += coercions;
  return out;
}

struct KbValidity {
  bool valid = true;
  std::vector<std::string> reasons;
};

// Valid iff every item-reference argument resolves in the knowledge base by
// id or case-folded display name; list values must resolve element-wise.
inline KbValidity validate_against_kb(const ToolCall& call, const ToolsetAnnotations& annotations,
                                      const KnowledgeBase& kb) {
  KbValidity result;
  auto check_one = [&](const std::string& argument, const json& value) {
    if (!value.is_string()) {
      result.valid = false;
      result.reasons.push_back("argument '" + argument + "' is not an item name: " + value.dump());
      return;
    }
    const auto ref = value.get<std::string>();
    if (kb.lookup(ref) == nullptr) {
      result.valid = false;
      result.reasons.push_back("unknown item '" + ref + "' in argument '" + argument + "'");
    }
  };
  for (const auto& [name, value] : call.arguments) {
    if (!annotations.is_item_reference(name)) continue;
    if (value.is_array()) {
      for (const auto& element : value) check_one(name, element);
    } else {
      check_one(name, value);
    }
  }
  return result;
}

namespace detail {

inline bool references_equipped_item(const ToolCall& call, const ToolsetAnnotations& annotations,
                                     const KnowledgeBase& kb) {
  auto equipped = [&](const json& value) {
    if (!value.is_string()) return false;
    const ItemRecord* record = kb.lookup(value.get<std::string>());
    return record != nullptr && record->equipped;
  };
  for (const auto& [name, value] : call.arguments) {
    if (!annotations.is_item_reference(name)) continue;
    if (value.is_array()) {
      for (const auto& element : value) {
        if (equipped(element)) return true;
      }
    } else if (equipped(value)) {
      return true;
    }
  }
  return false;
}

}  // namespace detail

// Deduplicates canonically equal calls, unions calls that differ only in one
// array-kind parameter, and drops conflicting (disposal of an equipped item)
// or unresolvable calls. Every input ends up in the output, a merged group,
// or the dropped list.
inline std::pair<std::vector<ToolCall>, PostprocessReport> merge_function_calls(
    const std::vector<ToolCall>& calls, std::span<const ToolSpec> toolset,
    const ToolsetAnnotations& annotations, const KnowledgeBase* kb) {
  PostprocessReport report;
  std::vector<ToolCall> survivors;
  for (const auto& call : calls) {
    if (kb != nullptr) {
      auto validity = validate_against_kb(call, annotations, *kb);
      if (!validity.valid) {
        std::string reason;
        for (std::size_t i = 0; i < validity.reasons.size(); ++i) {
          if (i > 0) reason += "; ";
          reason += validity.reasons[i];
        }
        report.dropped_calls.push_back({call, reason});
        continue;
      }
      if (annotations.is_disposal(call.function_name) &&
          detail::references_equipped_item(call, annotations, *kb)) {
        report.dropped_calls.push_back({call, "equipped-item conflict"});
        continue;
      }
    }
    survivors.push_back(call);
  }

  // group by function name + all non-array arguments
  auto array_params = [&](const std::string& function) {
    std::set<std::string> names;
    for (const auto& tool : toolset) {
      if (tool.name != function) continue;
      for (const auto& p : tool.parameters) {
        if (p.schema.kind == ParamKind::Array) names.insert(p.name);
      }
      break;
    }
    return names;
  };

  std::vector<std::string> group_keys(survivors.size());
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < survivors.size(); ++i) {
    const auto arrays = array_params(survivors[i].function_name);
    json signature = json::object();
    for (const auto& [name, value] : survivors[i].arguments) {
      if (arrays.count(name) == 0) signature[name] = value;
    }
    group_keys[i] = survivors[i].function_name + "\x1f" + signature.dump();
    groups[group_keys[i]].push_back(i);
  }

  // a group merges when its members disagree on at most one array parameter
  std::map<std::string, ToolCall> merged_for_group;
  for (const auto& [key, indices] : groups) {
    if (indices.size() < 2) continue;
    const auto arrays = array_params(survivors[indices[0]].function_name);
    std::set<std::string> present;
    for (std::size_t idx : indices) {
      for (const auto& name : arrays) {
        if (survivors[idx].arguments.count(name)) present.insert(name);
      }
    }
    std::vector<std::string> differing;
    for (const auto& name : present) {
      const json* first = nullptr;
      for (std::size_t idx : indices) {
        auto it = survivors[idx].arguments.find(name);
        const json* value = it == survivors[idx].arguments.end() ? nullptr : &it->second;
        if (first == nullptr && value != nullptr) {
          first = value;
        } else if (value == nullptr || *value != *first) {
          differing.push_back(name);
          break;
        }
      }
    }
    if (differing.size() > 1) continue;  // too different to consolidate

    ToolCall merged = survivors[indices[0]];
    if (differing.size() == 1) {
      const std::string& name = differing[0];
      json unioned = json::array();
      for (std::size_t idx : indices) {
        auto it = survivors[idx].arguments.find(name);
        if (it == survivors[idx].arguments.end()) continue;
        for (const auto& element : it->second) {
          bool seen = false;
          for (const auto& existing : unioned) {
            if (existing == element) {
              seen = true;
              break;
            }
          }
          if (!seen) unioned.push_back(element);
        }
      }
      merged.arguments[name] = std::move(unioned);
    }
    merged_for_group[key] = std::move(merged);
  }

  std::vector<ToolCall> output;
  std::set<std::string> emitted_groups;
  for (std::size_t i = 0; i < survivors.size(); ++i) {
    const auto& key = group_keys[i];
    auto merged = merged_for_group.find(key);
    if (merged == merged_for_group.end()) {
      output.push_back(survivors[i]);
      continue;
    }
    if (emitted_groups.insert(key).second) {
      MergedGroup group;
      for (std::size_t idx : groups[key]) group.inputs.push_back(survivors[idx]);
      group.output = merged->second;
      output.push_back(merged->second);
      report.merged_groups.push_back(std::move(group));
    }
  }
  return {std::move(output), std::move(report)};
}

// Full pipeline: normalize every call against its schema (uncoercible
// required parameters turn into reported drops), then merge.
inline std::pair<std::vector<ToolCall>, PostprocessReport> postprocess_tool_calls(
    const std::vector<ToolCall>& calls, std::span<const ToolSpec> toolset,
    const ToolsetAnnotations& annotations, const KnowledgeBase* kb,
    std::string_view user_query,
    const std::vector<NormalizationRule>& rules = default_normalization_rules()) {
  PostprocessReport report;
  std::vector<ToolCall> normalized;
  for (const auto& call : calls) {
    const ToolSpec* schema = nullptr;
    for (const auto& tool : toolset) {
      if (tool.name == call.function_name) {
        schema = &tool;
        break;
      }
    }
    if (schema == nullptr) {
      normalized.push_back(call);
      continue;
    }
    try {
      normalized.push_back(
          normalize_parameters(call, *schema, user_query, rules, &report.coercions));
    } catch (const CoercionError& e) {
      report.dropped_calls.push_back({call, e.what()});
    }
  }
  auto [merged, merge_report] = merge_function_calls(normalized, toolset, annotations, kb);
  for (auto& d : merge_report.dropped_calls) report.dropped_calls.push_back(std::move(d));
  report.merged_groups = std::move(merge_report.merged_groups);
  return {std::move(merged), std::move(report)};
}

}  // namespace ctxeval
