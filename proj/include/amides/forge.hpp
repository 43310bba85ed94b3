#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "amides/events.hpp"
#include "amides/rules.hpp"

namespace amides {

struct InapplicableRecipeError : Error {
    using Error::Error;
};

enum class RecipeKind { insertion, substitution, omission, reordering, recoding };

std::string_view to_string(RecipeKind kind);
std::optional<RecipeKind> recipe_kind_from_string(std::string_view name);

struct EvasionRecipe {
    std::string name;
    RecipeKind kind = RecipeKind::insertion;
    std::string field;  // empty: first selector event field present

    // insertion
    std::string insert_chars = "\"";
    std::string anchor;                    // fragment to wrap or split
    bool split = false;                    // split the anchor instead of wrapping it
    std::size_t split_offset = 1;          // insertion point inside the anchor
    std::vector<std::size_t> positions;    // explicit byte offsets when anchor empty

    // substitution: first pair whose key occurs is applied
    std::vector<std::pair<std::string, std::string>> synonyms;

    // omission
    std::string fragment;

    // reordering
    std::string first;
    std::string second;

    // recoding
    std::string codec = "ipv4-dec";
};

std::string apply_recipe(std::string_view text, const EvasionRecipe& recipe);

std::vector<EvasionRecipe> parse_recipes(const std::string& yaml_document);
std::vector<EvasionRecipe> load_recipes(const std::string& path);

struct ForgeResult {
    SiemEvent original;
    SiemEvent variant;
    std::string recipe_name;
    RecipeKind kind = RecipeKind::insertion;
    std::string target_rule_id;
    bool evades_target = false;
    std::vector<std::string> other_matches;

    bool valid() const { return evades_target && other_matches.empty(); }
};

// Applies every applicable recipe to the matching event and verifies each
// variant against the whole ruleset. The event must match the target rule.
std::vector<ForgeResult> generate_evasions(const SiemEvent& match_event,
                                           const RuleDefinition& target,
                                           const std::vector<RuleDefinition>& ruleset,
                                           const std::vector<EvasionRecipe>& recipes,
                                           const SelectorSet& selectors);

enum class Evadability { full, partial, none };

std::string_view to_string(Evadability label);

struct RuleAudit {
    std::string rule_id;
    Evadability label = Evadability::none;
    std::size_t branches_total = 0;
    std::size_t branches_evaded = 0;
};

// Labels each rule by how many of its top-level OR branches at least one
// valid forged variant stops satisfying.
std::vector<RuleAudit> audit_ruleset(const std::vector<RuleDefinition>& ruleset,
                                     const std::vector<SiemEvent>& matches,
                                     const std::vector<EvasionRecipe>& recipes,
                                     const SelectorSet& selectors);

}  // namespace amides
