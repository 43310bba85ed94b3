#include "amides/forge.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace amides {

std::string_view to_string(RecipeKind kind) {
    switch (kind) {
        case RecipeKind::insertion: return "insertion";
        case RecipeKind::substitution: return "substitution";
        case RecipeKind::omission: return "omission";
        case RecipeKind::reordering: return "reordering";
        case RecipeKind::recoding: return "recoding";
    }
    return "insertion";
}

std::optional<RecipeKind> recipe_kind_from_string(std::string_view name) {
    for (RecipeKind kind :
         {RecipeKind::insertion, RecipeKind::substitution, RecipeKind::omission,
          RecipeKind::reordering, RecipeKind::recoding})
        if (name == to_string(kind)) return kind;
    return std::nullopt;
}

std::string_view to_string(Evadability label) {
    switch (label) {
        case Evadability::full: return "full";
        case Evadability::partial: return "partial";
        case Evadability::none: return "none";
    }
    return "none";
}

namespace {

// The characters the feature pipeline filters; insertions are drawn from here
// so variants are provably feature-invariant.
bool allowed_insertion_chars(std::string_view chars) {
    for (std::size_t i = 0; i < chars.size(); ++i) {
        char c = chars[i];
        if (c == '"' || c == '\'' || c == '^' || c == '`') continue;
        if (static_cast<unsigned char>(c) == 0xC2 && i + 1 < chars.size() &&
            static_cast<unsigned char>(chars[i + 1]) == 0xB4) {
            ++i;
            continue;
        }
        return false;
    }
    return !chars.empty();
}

bool word_boundary(std::string_view text, std::size_t begin, std::size_t end) {
    auto boundary = [&](std::size_t i, bool before) {
        if (before) return i == 0 || text[i - 1] == ' ';
        return i >= text.size() || text[i] == ' ';
    };
    return boundary(begin, true) && boundary(end, false);
}

std::string apply_insertion(std::string_view text, const EvasionRecipe& recipe) {
    if (!allowed_insertion_chars(recipe.insert_chars))
        throw InapplicableRecipeError("recipe " + recipe.name +
                                      ": insertion characters must come from the "
                                      "filtered set (\" ' ^ ` ´)");
    std::string out(text);
    if (!recipe.anchor.empty()) {
        std::size_t at = out.find(recipe.anchor);
        if (at == std::string::npos)
            throw InapplicableRecipeError("recipe " + recipe.name + ": anchor `" +
                                          recipe.anchor + "` not found");
        if (recipe.split) {
            std::size_t offset = std::min(recipe.split_offset, recipe.anchor.size());
            out.insert(at + offset, recipe.insert_chars);
        } else {
            out.insert(at + recipe.anchor.size(), recipe.insert_chars);
            out.insert(at, recipe.insert_chars);
        }
        return out;
    }
    if (recipe.positions.empty())
        throw InapplicableRecipeError("recipe " + recipe.name +
                                      ": insertion needs an anchor or positions");
    std::vector<std::size_t> positions = recipe.positions;
    std::sort(positions.begin(), positions.end(), std::greater<>());
    for (std::size_t pos : positions) {
        if (pos > out.size())
            throw InapplicableRecipeError("recipe " + recipe.name + ": position " +
                                          std::to_string(pos) + " beyond end of text");
        out.insert(pos, recipe.insert_chars);
    }
    return out;
}

std::string apply_substitution(std::string_view text, const EvasionRecipe& recipe) {
    for (const auto& [from, to] : recipe.synonyms) {
        if (from.empty()) continue;
        std::size_t at = text.find(from);
        if (at == std::string_view::npos) continue;
        std::string out(text);
        out.replace(at, from.size(), to);
        return out;
    }
    throw InapplicableRecipeError("recipe " + recipe.name +
                                  ": no synonym key occurs in the text");
}

std::string apply_omission(std::string_view text, const EvasionRecipe& recipe) {
    if (recipe.fragment.empty())
        throw InapplicableRecipeError("recipe " + recipe.name + ": empty fragment");
    std::size_t at = text.find(recipe.fragment);
    if (at == std::string_view::npos)
        throw InapplicableRecipeError("recipe " + recipe.name + ": fragment `" +
                                      recipe.fragment + "` not found");
    std::string out(text);
    out.erase(at, recipe.fragment.size());
    return out;
}

std::string apply_reordering(std::string_view text, const EvasionRecipe& recipe) {
    if (recipe.first.empty() || recipe.second.empty())
        throw InapplicableRecipeError("recipe " + recipe.name +
                                      ": reordering needs two spans");
    std::size_t a = text.find(recipe.first);
    while (a != std::string_view::npos && !word_boundary(text, a, a + recipe.first.size()))
        a = text.find(recipe.first, a + 1);
    if (a == std::string_view::npos)
        throw InapplicableRecipeError("recipe " + recipe.name + ": span `" +
                                      recipe.first + "` not found");
    std::size_t b = text.find(recipe.second, a + recipe.first.size());
    while (b != std::string_view::npos &&
           !word_boundary(text, b, b + recipe.second.size()))
        b = text.find(recipe.second, b + 1);
    if (b == std::string_view::npos)
        throw InapplicableRecipeError("recipe " + recipe.name + ": span `" +
                                      recipe.second + "` not found after `" +
                                      recipe.first + "`");
    std::string out;
    out.reserve(text.size());
    out += text.substr(0, a);
    out += recipe.second;
    out += text.substr(a + recipe.first.size(), b - a - recipe.first.size());
    out += recipe.first;
    out += text.substr(b + recipe.second.size());
    return out;
}

std::string apply_recoding(std::string_view text, const EvasionRecipe& recipe) {
    if (recipe.codec != "ipv4-dec")
        throw InapplicableRecipeError("recipe " + recipe.name + ": unknown codec `" +
                                      recipe.codec + "`");
    auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (!is_digit(text[i]) || (i > 0 && (is_digit(text[i - 1]) || text[i - 1] == '.')))
            continue;
        std::size_t pos = i;
        unsigned long long value = 0;
        int octets = 0;
        bool ok = true;
        for (; octets < 4; ++octets) {
            if (pos >= text.size() || !is_digit(text[pos])) {
                ok = false;
                break;
            }
            unsigned long octet = 0;
            std::size_t len = 0;
            while (pos < text.size() && is_digit(text[pos]) && len < 3) {
                octet = octet * 10 + static_cast<unsigned long>(text[pos] - '0');
                ++pos;
                ++len;
            }
            if (octet > 255 || (pos < text.size() && is_digit(text[pos]))) {
                ok = false;
                break;
            }
            value = (value << 8) | octet;
            if (octets < 3) {
                if (pos >= text.size() || text[pos] != '.') {
                    ok = false;
                    break;
                }
                ++pos;
            }
        }
        if (ok && octets == 4 && (pos >= text.size() || text[pos] != '.')) {
            std::string out(text.substr(0, i));
            out += std::to_string(value);
            out += text.substr(pos);
            return out;
        }
    }
    throw InapplicableRecipeError("recipe " + recipe.name +
                                  ": no dotted-quad IPv4 address in the text");
}

}  // namespace

std::string apply_recipe(std::string_view text, const EvasionRecipe& recipe) {
    switch (recipe.kind) {
        case RecipeKind::insertion: return apply_insertion(text, recipe);
        case RecipeKind::substitution: return apply_substitution(text, recipe);
        case RecipeKind::omission: return apply_omission(text, recipe);
        case RecipeKind::reordering: return apply_reordering(text, recipe);
        case RecipeKind::recoding: return apply_recoding(text, recipe);
    }
    throw InapplicableRecipeError("recipe " + recipe.name + ": unknown kind");
}

namespace {

EvasionRecipe parse_recipe_node(const YAML::Node& node) {
    EvasionRecipe recipe;
    if (!node.IsMap()) throw Error("recipe document is not a map");
    if (!node["name"]) throw Error("recipe is missing `name`");
    recipe.name = node["name"].as<std::string>();
    if (!node["kind"]) throw Error("recipe " + recipe.name + " is missing `kind`");
    auto kind = recipe_kind_from_string(node["kind"].as<std::string>());
    if (!kind)
        throw Error("recipe " + recipe.name + ": unknown kind `" +
                    node["kind"].as<std::string>() + "`");
    recipe.kind = *kind;
    if (node["field"]) recipe.field = node["field"].as<std::string>();

    switch (recipe.kind) {
        case RecipeKind::insertion:
            if (node["chars"]) recipe.insert_chars = node["chars"].as<std::string>();
            if (!allowed_insertion_chars(recipe.insert_chars))
                throw Error("recipe " + recipe.name +
                            ": `chars` must be non-empty and drawn from \" ' ^ ` ´");
            if (node["anchor"]) recipe.anchor = node["anchor"].as<std::string>();
            if (node["split"]) recipe.split = node["split"].as<bool>();
            if (node["split_offset"])
                recipe.split_offset = node["split_offset"].as<std::size_t>();
            if (node["positions"])
                for (const auto& pos : node["positions"])
                    recipe.positions.push_back(pos.as<std::size_t>());
            if (recipe.anchor.empty() && recipe.positions.empty())
                throw Error("recipe " + recipe.name +
                            ": insertion needs `anchor` or `positions`");
            break;
        case RecipeKind::substitution:
            if (node["synonyms"]) {
                for (const auto& pair : node["synonyms"])
                    recipe.synonyms.emplace_back(pair["from"].as<std::string>(),
                                                 pair["to"].as<std::string>());
            } else if (node["from"] && node["to"]) {
                recipe.synonyms.emplace_back(node["from"].as<std::string>(),
                                             node["to"].as<std::string>());
            }
            if (recipe.synonyms.empty())
                throw Error("recipe " + recipe.name + ": substitution needs synonyms");
            break;
        case RecipeKind::omission:
            if (!node["fragment"])
                throw Error("recipe " + recipe.name + ": omission needs `fragment`");
            recipe.fragment = node["fragment"].as<std::string>();
            break;
        case RecipeKind::reordering:
            if (!node["first"] || !node["second"])
                throw Error("recipe " + recipe.name +
                            ": reordering needs `first` and `second`");
            recipe.first = node["first"].as<std::string>();
            recipe.second = node["second"].as<std::string>();
            break;
        case RecipeKind::recoding:
            if (node["codec"]) recipe.codec = node["codec"].as<std::string>();
            if (recipe.codec != "ipv4-dec")
                throw Error("recipe " + recipe.name + ": unknown codec `" +
                            recipe.codec + "`");
            break;
    }
    return recipe;
}

}  // namespace

std::vector<EvasionRecipe> parse_recipes(const std::string& yaml_document) {
    std::vector<EvasionRecipe> recipes;
    std::vector<YAML::Node> docs;
    try {
        docs = YAML::LoadAll(yaml_document);
    } catch (const YAML::Exception& e) {
        throw Error(std::string("cannot parse recipes: ") + e.what());
    }
    for (const YAML::Node& doc : docs) {
        if (!doc || doc.IsNull()) continue;
        if (doc.IsSequence()) {
            for (const auto& item : doc) recipes.push_back(parse_recipe_node(item));
        } else if (doc.IsMap() && doc["recipes"]) {
            for (const auto& item : doc["recipes"])
                recipes.push_back(parse_recipe_node(item));
        } else {
            recipes.push_back(parse_recipe_node(doc));
        }
    }
    return recipes;
}

std::vector<EvasionRecipe> load_recipes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open recipes file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_recipes(buffer.str());
}

std::vector<ForgeResult> generate_evasions(const SiemEvent& match_event,
                                           const RuleDefinition& target,
                                           const std::vector<RuleDefinition>& ruleset,
                                           const std::vector<EvasionRecipe>& recipes,
                                           const SelectorSet& selectors) {
    if (!amides::match_event(target, match_event))
        throw Error("event " + match_event.id + " does not match rule " + target.id);
    const FieldSelector& selector = selectors.for_type(match_event.event_type);

    std::vector<ForgeResult> results;
    for (const EvasionRecipe& recipe : recipes) {
        std::string field = recipe.field;
        if (field.empty()) {
            for (const std::string& candidate : selector.event_fields)
                if (match_event.fields.contains(candidate)) {
                    field = candidate;
                    break;
                }
        }
        auto it = match_event.fields.find(field);
        if (it == match_event.fields.end()) continue;

        std::string mutated;
        try {
            mutated = apply_recipe(it->second, recipe);
        } catch (const InapplicableRecipeError&) {
            continue;
        }

        ForgeResult result;
        result.original = match_event;
        result.variant = match_event;
        result.variant.id = match_event.id + ":" + recipe.name;
        result.variant.fields[field] = mutated;
        result.recipe_name = recipe.name;
        result.kind = recipe.kind;
        result.target_rule_id = target.id;
        result.evades_target = !amides::match_event(target, result.variant);
        for (const std::string& id : match_all(ruleset, result.variant))
            if (id != target.id) result.other_matches.push_back(id);
        results.push_back(std::move(result));
    }
    return results;
}

std::vector<RuleAudit> audit_ruleset(const std::vector<RuleDefinition>& ruleset,
                                     const std::vector<SiemEvent>& matches,
                                     const std::vector<EvasionRecipe>& recipes,
                                     const SelectorSet& selectors) {
    std::vector<RuleAudit> audits;
    for (const RuleDefinition& rule : ruleset) {
        RuleAudit audit;
        audit.rule_id = rule.id;
        std::vector<ConditionNode> branches = or_branches(rule);
        audit.branches_total = branches.size();
        std::vector<bool> evaded(branches.size(), false);

        for (const SiemEvent& event : matches) {
            if (event.event_type != rule.event_type) continue;
            if (!match_event(rule, event)) continue;
            std::vector<ForgeResult> results =
                generate_evasions(event, rule, ruleset, recipes, selectors);
            for (const ForgeResult& result : results) {
                if (!result.valid()) continue;
                for (std::size_t b = 0; b < branches.size(); ++b) {
                    if (evaded[b]) continue;
                    if (eval_condition(branches[b], rule, result.original) &&
                        !eval_condition(branches[b], rule, result.variant))
                        evaded[b] = true;
                }
            }
        }
        audit.branches_evaded =
            static_cast<std::size_t>(std::count(evaded.begin(), evaded.end(), true));
        if (audit.branches_total > 0 && audit.branches_evaded == audit.branches_total)
            audit.label = Evadability::full;
        else if (audit.branches_evaded > 0)
            audit.label = Evadability::partial;
        else
            audit.label = Evadability::none;
        audits.push_back(std::move(audit));
    }
    return audits;
}

}  // namespace amides
