#include "amides/rules.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace amides {

namespace {

bool char_eq(char a, char b, bool case_insensitive) {
    if (a == b) return true;
    if (!case_insensitive) return false;
    auto low = [](char c) {
        return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
    };
    return low(a) == low(b);
}

std::string wrap_pattern(MatchMode mode, const std::string& pattern) {
    switch (mode) {
        case MatchMode::contains: return "*" + pattern + "*";
        case MatchMode::startswith: return pattern + "*";
        case MatchMode::endswith: return "*" + pattern;
        case MatchMode::exact:
        case MatchMode::wildcard: return pattern;
    }
    return pattern;
}

bool has_metachar(std::string_view pattern) {
    return pattern.find_first_of("*?") != std::string_view::npos;
}

EventType event_type_from_logsource(const YAML::Node& logsource,
                                    const std::string& where) {
    std::string category, product, service;
    if (logsource) {
        if (logsource["category"]) category = logsource["category"].as<std::string>();
        if (logsource["product"]) product = logsource["product"].as<std::string>();
        if (logsource["service"]) service = logsource["service"].as<std::string>();
    }
    if (category == "process_creation") return EventType::process_creation;
    if (category == "proxy" || category == "webserver" || category == "firewall")
        return EventType::web_request;
    if (category.starts_with("registry")) return EventType::registry_change;
    if (category == "ps_script" || category == "ps_module" ||
        service == "powershell" || category == "powershell")
        return EventType::powershell_script;
    throw UnsupportedConstructError(where + ": unsupported logsource (category=" +
                                    category + ", product=" + product +
                                    ", service=" + service + ")");
}

struct ConditionParser {
    std::vector<std::string> tokens;
    std::size_t pos = 0;
    std::string where;

    explicit ConditionParser(const std::string& text, std::string where_)
        : where(std::move(where_)) {
        std::string current;
        auto flush = [&] {
            if (!current.empty()) {
                tokens.push_back(current);
                current.clear();
            }
        };
        for (char c : text) {
            if (c == '(' || c == ')') {
                flush();
                tokens.push_back(std::string(1, c));
            } else if (c == ' ' || c == '\t') {
                flush();
            } else {
                current += c;
            }
        }
        flush();
    }

    bool at_end() const { return pos >= tokens.size(); }
    const std::string& peek() const { return tokens[pos]; }

    bool peek_keyword(std::string_view kw) const {
        return !at_end() && iequals(tokens[pos], kw);
    }

    void check_supported(const std::string& token) {
        if (token == "|")
            throw UnsupportedConstructError(where + ": aggregation conditions");
        if (iequals(token, "of"))
            throw UnsupportedConstructError(where + ": quantified conditions (`of`)");
        if (iequals(token, "near"))
            throw UnsupportedConstructError(where + ": temporal conditions (`near`)");
        if (iequals(token, "them"))
            throw UnsupportedConstructError(where + ": quantified conditions (`them`)");
    }

    ConditionNode parse_expr() {
        ConditionNode node = parse_term();
        if (!peek_keyword("or")) return node;
        ConditionNode result;
        result.kind = ConditionNode::Kind::op_or;
        result.children.push_back(std::move(node));
        while (peek_keyword("or")) {
            ++pos;
            result.children.push_back(parse_term());
        }
        return result;
    }

    ConditionNode parse_term() {
        ConditionNode node = parse_factor();
        if (!peek_keyword("and")) return node;
        ConditionNode result;
        result.kind = ConditionNode::Kind::op_and;
        result.children.push_back(std::move(node));
        while (peek_keyword("and")) {
            ++pos;
            result.children.push_back(parse_factor());
        }
        return result;
    }

    ConditionNode parse_factor() {
        if (at_end()) throw RuleSyntaxError(where + ": condition ended unexpectedly");
        if (peek_keyword("not")) {
            ++pos;
            ConditionNode node;
            node.kind = ConditionNode::Kind::op_not;
            node.children.push_back(parse_factor());
            return node;
        }
        if (peek() == "(") {
            ++pos;
            ConditionNode node = parse_expr();
            if (at_end() || peek() != ")")
                throw RuleSyntaxError(where + ": missing `)` in condition");
            ++pos;
            return node;
        }
        const std::string token = tokens[pos];
        check_supported(token);
        if (token == ")" || iequals(token, "and") || iequals(token, "or"))
            throw RuleSyntaxError(where + ": unexpected `" + token + "` in condition");
        if (std::all_of(token.begin(), token.end(),
                        [](char c) { return c >= '0' && c <= '9'; }))
            throw UnsupportedConstructError(where + ": quantified conditions (`" +
                                            token + " of ...`)");
        if (iequals(token, "all"))
            throw UnsupportedConstructError(where + ": quantified conditions (`all of`)");
        ++pos;
        ConditionNode node;
        node.kind = ConditionNode::Kind::identifier;
        node.identifier = token;
        return node;
    }
};

void collect_identifiers(const ConditionNode& node, std::set<std::string>& out) {
    if (node.kind == ConditionNode::Kind::identifier) out.insert(node.identifier);
    for (const ConditionNode& child : node.children) collect_identifiers(child, out);
}

MatchClause parse_clause(const std::string& raw_field, const YAML::Node& value,
                         const std::string& where) {
    MatchClause clause;
    std::vector<std::string> parts;
    std::stringstream ss(raw_field);
    std::string part;
    while (std::getline(ss, part, '|')) parts.push_back(part);
    if (parts.empty() || parts[0].empty())
        throw RuleSyntaxError(where + ": empty field name");
    clause.field = parts[0];
    if (parts.size() > 2)
        throw UnsupportedConstructError(where + ": chained modifiers in `" + raw_field +
                                        "`");
    if (parts.size() == 2) {
        const std::string& mod = parts[1];
        if (mod == "contains") clause.mode = MatchMode::contains;
        else if (mod == "startswith") clause.mode = MatchMode::startswith;
        else if (mod == "endswith") clause.mode = MatchMode::endswith;
        else
            throw UnsupportedConstructError(where + ": modifier `" + mod + "`");
    }

    auto add_pattern = [&](const YAML::Node& node) {
        if (node.IsNull())
            throw UnsupportedConstructError(where + ": null value for `" + clause.field +
                                            "`");
        if (!node.IsScalar())
            throw UnsupportedConstructError(where + ": non-scalar pattern for `" +
                                            clause.field + "`");
        clause.patterns.push_back(node.as<std::string>());
    };
    if (value.IsSequence()) {
        for (const auto& item : value) add_pattern(item);
    } else {
        add_pattern(value);
    }
    if (clause.patterns.empty())
        throw RuleSyntaxError(where + ": empty pattern list for `" + clause.field + "`");
    if (parts.size() == 1) {
        bool any_meta = std::any_of(clause.patterns.begin(), clause.patterns.end(),
                                    [](const std::string& p) { return has_metachar(p); });
        clause.mode = any_meta ? MatchMode::wildcard : MatchMode::exact;
    }
    return clause;
}

bool clause_matches(const MatchClause& clause, const SiemEvent& event) {
    auto it = event.fields.find(clause.field);
    if (it == event.fields.end()) return false;
    for (const std::string& pattern : clause.patterns)
        if (wildcard_match(wrap_pattern(clause.mode, pattern), it->second)) return true;
    return false;
}

void serialize_condition(const ConditionNode& node, std::string& out) {
    switch (node.kind) {
        case ConditionNode::Kind::identifier: out += node.identifier; return;
        case ConditionNode::Kind::op_not:
            out += "not(";
            serialize_condition(node.children[0], out);
            out += ')';
            return;
        case ConditionNode::Kind::op_and:
        case ConditionNode::Kind::op_or:
            out += node.kind == ConditionNode::Kind::op_and ? "and(" : "or(";
            for (std::size_t i = 0; i < node.children.size(); ++i) {
                if (i) out += ',';
                serialize_condition(node.children[i], out);
            }
            out += ')';
            return;
    }
}

}  // namespace

bool wildcard_match(std::string_view pattern, std::string_view text,
                    bool case_insensitive) {
    std::size_t p = 0, t = 0;
    std::size_t star = std::string_view::npos, mark = 0;
    while (t < text.size()) {
        if (p < pattern.size() &&
            (pattern[p] == '?' || char_eq(pattern[p], text[t], case_insensitive))) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = t;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            t = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

const SearchIdentifier* RuleDefinition::find_identifier(std::string_view name) const {
    for (const SearchIdentifier& identifier : identifiers)
        if (identifier.name == name) return &identifier;
    return nullptr;
}

RuleDefinition parse_rule(const std::string& yaml_document,
                          const std::string& source_path) {
    YAML::Node root;
    const std::string where = source_path.empty() ? "rule" : source_path;
    try {
        root = YAML::Load(yaml_document);
    } catch (const YAML::Exception& e) {
        throw RuleSyntaxError(where + ": " + e.what());
    }
    if (!root.IsMap()) throw RuleSyntaxError(where + ": rule document is not a map");

    RuleDefinition rule;
    rule.source_path = source_path;
    try {
        if (!root["id"]) throw RuleSyntaxError(where + ": missing `id`");
        rule.id = root["id"].as<std::string>();
        rule.title = root["title"] ? root["title"].as<std::string>() : rule.id;
        if (root["description"]) rule.description = root["description"].as<std::string>();
        if (root["references"])
            for (const auto& ref : root["references"])
                rule.references.push_back(ref.as<std::string>());
        rule.event_type = event_type_from_logsource(root["logsource"], where);

        YAML::Node detection = root["detection"];
        if (!detection || !detection.IsMap())
            throw RuleSyntaxError(where + ": missing `detection` block");
        std::string condition_text;
        for (const auto& item : detection) {
            const std::string key = item.first.as<std::string>();
            if (key == "condition") {
                if (!item.second.IsScalar())
                    throw UnsupportedConstructError(where + ": non-scalar condition");
                condition_text = item.second.as<std::string>();
                continue;
            }
            if (item.second.IsSequence())
                throw UnsupportedConstructError(
                    where + ": list-valued search identifier `" + key +
                    "` (keyword lists / identifier alternatives)");
            if (!item.second.IsMap())
                throw RuleSyntaxError(where + ": search identifier `" + key +
                                      "` is not a map");
            SearchIdentifier identifier;
            identifier.name = key;
            for (const auto& clause : item.second)
                identifier.clauses.push_back(
                    parse_clause(clause.first.as<std::string>(), clause.second, where));
            if (identifier.clauses.empty())
                throw RuleSyntaxError(where + ": identifier `" + key + "` is empty");
            rule.identifiers.push_back(std::move(identifier));
        }
        if (condition_text.empty())
            throw RuleSyntaxError(where + ": detection has no `condition`");

        ConditionParser parser(condition_text, where);
        rule.condition = parser.parse_expr();
        if (!parser.at_end()) {
            parser.check_supported(parser.peek());
            throw RuleSyntaxError(where + ": trailing tokens in condition after `" +
                                  parser.peek() + "`");
        }
    } catch (const YAML::Exception& e) {
        throw RuleSyntaxError(where + ": " + e.what());
    }

    std::set<std::string> referenced;
    collect_identifiers(rule.condition, referenced);
    for (const std::string& name : referenced)
        if (!rule.find_identifier(name))
            throw RuleSyntaxError(where + ": condition references undefined identifier `" +
                                  name + "`");
    return rule;
}

RuleDefinition load_rule_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open rule file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_rule(buffer.str(), path);
}

std::vector<RuleDefinition> load_ruleset(const std::string& directory) {
    namespace fs = std::filesystem;
    std::vector<std::string> paths;
    for (const auto& entry : fs::recursive_directory_iterator(directory)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        if (ext == ".yml" || ext == ".yaml") paths.push_back(entry.path().string());
    }
    std::sort(paths.begin(), paths.end());
    std::vector<RuleDefinition> rules;
    std::set<std::string> ids;
    for (const std::string& path : paths) {
        rules.push_back(load_rule_file(path));
        if (!ids.insert(rules.back().id).second)
            throw RuleSyntaxError(path + ": duplicate rule id " + rules.back().id);
    }
    return rules;
}

bool eval_condition(const ConditionNode& node, const RuleDefinition& rule,
                    const SiemEvent& event) {
    switch (node.kind) {
        case ConditionNode::Kind::identifier: {
            const SearchIdentifier* identifier = rule.find_identifier(node.identifier);
            if (!identifier) return false;
            for (const MatchClause& clause : identifier->clauses)
                if (!clause_matches(clause, event)) return false;
            return true;
        }
        case ConditionNode::Kind::op_and:
            for (const ConditionNode& child : node.children)
                if (!eval_condition(child, rule, event)) return false;
            return true;
        case ConditionNode::Kind::op_or:
            for (const ConditionNode& child : node.children)
                if (eval_condition(child, rule, event)) return true;
            return false;
        case ConditionNode::Kind::op_not:
            return !eval_condition(node.children[0], rule, event);
    }
    return false;
}

bool match_event(const RuleDefinition& rule, const SiemEvent& event) {
    return eval_condition(rule.condition, rule, event);
}

std::vector<std::string> match_all(const std::vector<RuleDefinition>& ruleset,
                                   const SiemEvent& event) {
    std::vector<std::string> ids;
    for (const RuleDefinition& rule : ruleset) {
        if (rule.event_type != event.event_type) continue;
        if (match_event(rule, event)) ids.push_back(rule.id);
    }
    return ids;
}

namespace {

void collect_positive_identifiers(const ConditionNode& node,
                                  std::vector<std::string>& out) {
    switch (node.kind) {
        case ConditionNode::Kind::identifier:
            out.push_back(node.identifier);
            return;
        case ConditionNode::Kind::op_and:
        case ConditionNode::Kind::op_or:
            for (const ConditionNode& child : node.children)
                collect_positive_identifiers(child, out);
            return;
        case ConditionNode::Kind::op_not:
            return;  // everything below is an exclusion
    }
}

}  // namespace

RuleTermSet extract_rule_terms(const RuleDefinition& rule, const FieldSelector& selector) {
    std::vector<std::string> positive;
    collect_positive_identifiers(rule.condition, positive);

    std::set<std::string> positive_names(positive.begin(), positive.end());
    RuleTermSet terms;
    terms.rule_id = rule.id;
    std::set<std::string> seen;
    for (const SearchIdentifier& identifier : rule.identifiers) {
        if (!positive_names.contains(identifier.name)) continue;
        for (const MatchClause& clause : identifier.clauses) {
            bool selected = false;
            for (const std::string& rule_field : selector.rule_fields)
                if (wildcard_match(rule_field, clause.field)) {
                    selected = true;
                    break;
                }
            if (!selected) continue;
            for (const std::string& pattern : clause.patterns)
                if (seen.insert(pattern).second) terms.terms.push_back(pattern);
        }
    }
    return terms;
}

std::vector<ConditionNode> or_branches(const RuleDefinition& rule) {
    std::vector<ConditionNode> branches;
    std::vector<const ConditionNode*> stack{&rule.condition};
    while (!stack.empty()) {
        const ConditionNode* node = stack.back();
        stack.pop_back();
        if (node->kind == ConditionNode::Kind::op_or) {
            for (auto it = node->children.rbegin(); it != node->children.rend(); ++it)
                stack.push_back(&*it);
        } else {
            branches.push_back(*node);
        }
    }
    return branches;
}

std::string ruleset_fingerprint(const std::vector<RuleDefinition>& ruleset) {
    std::string blob;
    for (const RuleDefinition& rule : ruleset) {
        blob += rule.id;
        blob += '\x1E';
        blob += rule.title;
        blob += '\x1E';
        blob += to_string(rule.event_type);
        blob += '\x1E';
        for (const SearchIdentifier& identifier : rule.identifiers) {
            blob += identifier.name;
            blob += '\x1D';
            for (const MatchClause& clause : identifier.clauses) {
                blob += clause.field;
                blob += '|';
                blob += std::to_string(static_cast<int>(clause.mode));
                for (const std::string& pattern : clause.patterns) {
                    blob += '\x1C';
                    blob += pattern;
                }
                blob += '\x1D';
            }
        }
        serialize_condition(rule.condition, blob);
        blob += '\x1E';
    }
    return to_hex64(fnv1a64(blob));
}

}  // namespace amides
