#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "amides/events.hpp"

namespace amides {

struct RuleSyntaxError : Error {
    using Error::Error;
};
struct UnsupportedConstructError : Error {
    using Error::Error;
};

enum class MatchMode {
    exact,
    contains,
    startswith,
    endswith,
    wildcard,  // bare pattern containing * or ?
};

struct MatchClause {
    std::string field;
    MatchMode mode = MatchMode::exact;
    std::vector<std::string> patterns;  // OR within a clause
};

// One named search identifier: all clauses must hold (AND).
struct SearchIdentifier {
    std::string name;
    std::vector<MatchClause> clauses;
};

struct ConditionNode {
    enum class Kind { identifier, op_and, op_or, op_not };
    Kind kind = Kind::identifier;
    std::string identifier;
    std::vector<ConditionNode> children;
};

struct RuleDefinition {
    std::string id;
    std::string title;
    std::string description;
    std::vector<std::string> references;
    EventType event_type = EventType::process_creation;
    std::vector<SearchIdentifier> identifiers;
    ConditionNode condition;
    std::string source_path;

    const SearchIdentifier* find_identifier(std::string_view name) const;
};

struct RuleTermSet {
    std::string rule_id;
    std::vector<std::string> terms;
};

// `*` spans any run (including empty), `?` exactly one character. Matches the
// whole text; ASCII case-insensitive by default.
bool wildcard_match(std::string_view pattern, std::string_view text,
                    bool case_insensitive = true);

RuleDefinition parse_rule(const std::string& yaml_document,
                          const std::string& source_path = "");
RuleDefinition load_rule_file(const std::string& path);

// Recursive *.yml / *.yaml scan, lexicographic path order. Duplicate rule ids
// are an error.
std::vector<RuleDefinition> load_ruleset(const std::string& directory);

bool match_event(const RuleDefinition& rule, const SiemEvent& event);

// Ids of matching rules of the event's type, in ruleset order.
std::vector<std::string> match_all(const std::vector<RuleDefinition>& ruleset,
                                   const SiemEvent& event);

// Patterns from command-line-like fields reachable without crossing a `not`,
// in identifier order then clause order; duplicates removed, first kept.
RuleTermSet extract_rule_terms(const RuleDefinition& rule, const FieldSelector& selector);

// Top-level OR alternatives of the condition (the whole condition if its root
// is not an `or`). Used by evadability audits.
std::vector<ConditionNode> or_branches(const RuleDefinition& rule);
bool eval_condition(const ConditionNode& node, const RuleDefinition& rule,
                    const SiemEvent& event);

std::string ruleset_fingerprint(const std::vector<RuleDefinition>& ruleset);

}  // namespace amides
