#pragma once

// Shared fixtures for the test suite: scratch directories, file helpers, and
// small builders for rules and events so individual tests stay readable.

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "amides/events.hpp"
#include "amides/rules.hpp"

namespace testsupport {

// Creates a unique directory under the system temp root and removes it (and
// everything inside) when the test scope ends.
class TempDir {
  public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        const auto base = std::filesystem::temp_directory_path();
        path_ = base / ("amides-test-" + std::to_string(::getpid()) + "-" +
                        std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

  private:
    std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline amides::SiemEvent make_event(std::string id, amides::EventType type,
                                    std::string command_line,
                                    std::string timestamp = "") {
    amides::SiemEvent event;
    event.id = std::move(id);
    event.event_type = type;
    event.fields["CommandLine"] = std::move(command_line);
    if (!timestamp.empty()) event.timestamp = std::move(timestamp);
    return event;
}

inline amides::SiemEvent make_process_event(std::string id, std::string command_line,
                                            std::string timestamp = "") {
    return make_event(std::move(id), amides::EventType::process_creation,
                      std::move(command_line), std::move(timestamp));
}

// Builds a single-identifier process_creation rule whose one clause uses the
// `contains` modifier with the given patterns.
inline std::string contains_rule_yaml(const std::string& id,
                                      const std::vector<std::string>& patterns,
                                      const std::string& field = "CommandLine") {
    std::string yaml = "title: " + id + "\nid: " + id +
                       "\nlogsource:\n  category: process_creation\n"
                       "detection:\n  selection:\n    " +
                       field + "|contains:\n";
    for (const std::string& pattern : patterns) yaml += "      - '" + pattern + "'\n";
    yaml += "  condition: selection\n";
    return yaml;
}

inline amides::RuleDefinition contains_rule(const std::string& id,
                                            const std::vector<std::string>& patterns,
                                            const std::string& field = "CommandLine") {
    return amides::parse_rule(contains_rule_yaml(id, patterns, field));
}

// Deterministic pseudo-random ASCII word of the given length.
inline std::string random_word(std::mt19937_64& rng, std::size_t min_len,
                               std::size_t max_len) {
    static const char alphabet[] = "abcdefghijklmnopqrstuvwxyz";
    std::uniform_int_distribution<std::size_t> len(min_len, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, sizeof(alphabet) - 2);
    std::string word;
    const std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) word += alphabet[pick(rng)];
    return word;
}

}  // namespace testsupport
