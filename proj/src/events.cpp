#include "amides/events.hpp"

#include <fstream>
#include <istream>
#include <sstream>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

namespace amides {

std::string_view to_string(EventType type) {
    switch (type) {
        case EventType::process_creation: return "process_creation";
        case EventType::web_request: return "web_request";
        case EventType::registry_change: return "registry_change";
        case EventType::powershell_script: return "powershell_script";
    }
    return "process_creation";
}

std::optional<EventType> event_type_from_string(std::string_view name) {
    for (EventType type : kEventTypes)
        if (name == to_string(type)) return type;
    return std::nullopt;
}

FieldSelector default_selector(EventType type) {
    switch (type) {
        case EventType::process_creation:
            return {type, {"CommandLine"}, {"CommandLine"}};
        case EventType::web_request:
            return {type, {"url.full"}, {"c-uri*", "cs-uri*", "cs-host", "r-dns"}};
        case EventType::registry_change:
            return {type, {"TargetObject", "Details"}, {"TargetObject", "Details"}};
        case EventType::powershell_script:
            return {type, {"ScriptBlockText"}, {"ScriptBlockText", "Message"}};
    }
    return {type, {"CommandLine"}, {"CommandLine"}};
}

const FieldSelector& SelectorSet::for_type(EventType type) const {
    for (const FieldSelector& selector : selectors)
        if (selector.event_type == type) return selector;
    throw Error("no selector for event type " + std::string(to_string(type)));
}

SelectorSet SelectorSet::defaults() {
    SelectorSet set;
    for (EventType type : kEventTypes) set.selectors.push_back(default_selector(type));
    return set;
}

SelectorSet load_selectors(const std::string& path) {
    SelectorSet set = SelectorSet::defaults();
    YAML::Node root = YAML::LoadFile(path);
    YAML::Node selectors = root["selectors"] ? root["selectors"] : root;
    for (const auto& item : selectors) {
        auto type = event_type_from_string(item.first.as<std::string>());
        if (!type) throw Error("unknown event type in selector config: " +
                               item.first.as<std::string>());
        FieldSelector selector{*type, {}, {}};
        for (const auto& f : item.second["event_fields"])
            selector.event_fields.push_back(f.as<std::string>());
        for (const auto& f : item.second["rule_fields"])
            selector.rule_fields.push_back(f.as<std::string>());
        if (selector.event_fields.empty() || selector.rule_fields.empty())
            throw Error("selector lists must be non-empty for " +
                        std::string(to_string(*type)));
        for (FieldSelector& existing : set.selectors)
            if (existing.event_type == *type) existing = selector;
    }
    return set;
}

SiemEvent parse_event_line(std::string_view line, std::size_t line_no) {
    nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
    auto fail = [line_no](const std::string& what) -> MalformedLineError {
        return MalformedLineError("line " + std::to_string(line_no) + ": " + what);
    };
    if (doc.is_discarded() || !doc.is_object()) throw fail("not a JSON object");
    if (!doc.contains("id") || !doc["id"].is_string() || doc["id"].get<std::string>().empty())
        throw MissingRequiredFieldError("line " + std::to_string(line_no) + ": id");
    if (!doc.contains("event_type") || !doc["event_type"].is_string())
        throw MissingRequiredFieldError("line " + std::to_string(line_no) +
                                        ": event_type");
    if (!doc.contains("fields") || !doc["fields"].is_object())
        throw MissingRequiredFieldError("line " + std::to_string(line_no) + ": fields");

    SiemEvent event;
    event.id = doc["id"].get<std::string>();
    auto type = event_type_from_string(doc["event_type"].get<std::string>());
    if (!type) throw fail("unknown event_type " + doc["event_type"].get<std::string>());
    event.event_type = *type;
    for (const auto& [key, value] : doc["fields"].items()) {
        if (!value.is_string()) throw fail("field " + key + " is not a string");
        event.fields[key] = value.get<std::string>();
    }
    if (doc.contains("timestamp")) {
        if (!doc["timestamp"].is_string()) throw fail("timestamp is not a string");
        event.timestamp = doc["timestamp"].get<std::string>();
    }
    return event;
}

std::string serialize_event(const SiemEvent& event) {
    nlohmann::ordered_json doc;
    doc["id"] = event.id;
    doc["event_type"] = to_string(event.event_type);
    if (event.timestamp) doc["timestamp"] = *event.timestamp;
    nlohmann::ordered_json fields = nlohmann::ordered_json::object();
    for (const auto& [key, value] : event.fields) fields[key] = value;
    doc["fields"] = std::move(fields);
    return doc.dump();
}

std::string extract_text(const SiemEvent& event, const FieldSelector& selector) {
    std::string out;
    bool found = false;
    for (const std::string& name : selector.event_fields) {
        auto it = event.fields.find(name);
        if (it == event.fields.end()) continue;
        if (found) out += ' ';
        out += it->second;
        found = true;
    }
    if (!found)
        throw AllFieldsMissingError("event " + event.id + " has none of the " +
                                    std::string(to_string(selector.event_type)) +
                                    " selector fields");
    return out;
}

EventReader::EventReader(std::istream& in, bool strict) : in_(in), strict_(strict) {}

std::optional<SiemEvent> EventReader::next() {
    std::string line;
    while (std::getline(in_, line)) {
        ++lines_;
        if (line.empty()) continue;
        try {
            return parse_event_line(line, lines_);
        } catch (const Error&) {
            if (strict_) throw;
            ++malformed_;
        }
    }
    return std::nullopt;
}

std::vector<SiemEvent> read_events_file(const std::string& path, bool strict,
                                        std::size_t* malformed) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open events file: " + path);
    EventReader reader(in, strict);
    std::vector<SiemEvent> events;
    while (auto event = reader.next()) events.push_back(std::move(*event));
    if (malformed) *malformed = reader.malformed_lines();
    return events;
}

}  // namespace amides
