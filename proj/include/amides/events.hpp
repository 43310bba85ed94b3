#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "amides/util.hpp"

namespace amides {

enum class EventType {
    process_creation,
    web_request,
    registry_change,
    powershell_script,
};

std::string_view to_string(EventType type);
std::optional<EventType> event_type_from_string(std::string_view name);
constexpr inline EventType kEventTypes[] = {
    EventType::process_creation,
    EventType::web_request,
    EventType::registry_change,
    EventType::powershell_script,
};

struct MalformedLineError : Error {
    using Error::Error;
};
struct MissingRequiredFieldError : Error {
    using Error::Error;
};
struct AllFieldsMissingError : Error {
    using Error::Error;
};

struct SiemEvent {
    std::string id;
    EventType event_type = EventType::process_creation;
    std::map<std::string, std::string> fields;
    std::optional<std::string> timestamp;

    bool operator==(const SiemEvent&) const = default;
};

// Which event fields feed classification text, and which rule fields mark a
// rule's patterns as command-line-like. Rule field entries may use wildcards.
struct FieldSelector {
    EventType event_type = EventType::process_creation;
    std::vector<std::string> event_fields;
    std::vector<std::string> rule_fields;
};

FieldSelector default_selector(EventType type);

struct SelectorSet {
    std::vector<FieldSelector> selectors;

    const FieldSelector& for_type(EventType type) const;
    static SelectorSet defaults();
};

// Loads selector overrides from YAML; types not mentioned keep defaults.
SelectorSet load_selectors(const std::string& path);

SiemEvent parse_event_line(std::string_view line, std::size_t line_no = 0);
std::string serialize_event(const SiemEvent& event);

// Concatenates the selector's event fields present on the event, in selector
// order, separated by a single space.
std::string extract_text(const SiemEvent& event, const FieldSelector& selector);

// Lazy JSONL reader. In lenient mode malformed lines are counted and skipped;
// in strict mode they throw MalformedLineError.
class EventReader {
  public:
    explicit EventReader(std::istream& in, bool strict = false);

    std::optional<SiemEvent> next();
    std::size_t malformed_lines() const { return malformed_; }
    std::size_t lines_read() const { return lines_; }

  private:
    std::istream& in_;
    bool strict_;
    std::size_t malformed_ = 0;
    std::size_t lines_ = 0;
};

std::vector<SiemEvent> read_events_file(const std::string& path, bool strict = false,
                                        std::size_t* malformed = nullptr);

}  // namespace amides
