#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amides/classifier.hpp"
#include "amides/rules.hpp"

namespace amides {

struct RuleMatchRef {
    std::string rule_id;
    std::string title;

    bool operator==(const RuleMatchRef&) const = default;
};

struct EvasionVerdict {
    double raw_score = 0.0;
    double threshold = 0.5;  // unit threshold the run used
    AttributionList attribution;

    bool operator==(const EvasionVerdict&) const = default;
};

struct Alert {
    std::string event_id;
    std::optional<std::string> timestamp;  // only when the event carried one
    std::vector<RuleMatchRef> rule_matches;
    std::optional<EvasionVerdict> evasion;

    bool operator==(const Alert&) const = default;
};

std::string serialize_alert(const Alert& alert);

struct RunMetrics {
    std::uint64_t events_total = 0;
    std::uint64_t alerts_total = 0;
    std::uint64_t rule_match_alerts = 0;
    std::uint64_t evasion_alerts = 0;
    std::uint64_t cache_hits = 0;
    std::uint64_t cache_misses = 0;
    std::uint64_t evictions = 0;
    std::uint64_t malformed_lines = 0;
    double wall_seconds = 0.0;
    double events_per_second = 0.0;
};

std::string serialize_metrics(const RunMetrics& metrics);

struct PipelineConfig {
    double unit_threshold = 0.5;
    std::size_t top_n = 10;
    std::size_t cache_capacity = 1 << 16;
    std::size_t cache_shards = 1;
    std::size_t workers = 1;
    bool strict = false;
};

// Rule matching plus (when a bundle is present) misuse classification with
// cached scores and attribution gated on flagged events. At most one alert
// per event, none when nothing fired.
class DetectionPipeline {
  public:
    DetectionPipeline(const std::vector<RuleDefinition>* ruleset,
                      const ClassifierBundle* bundle, const PipelineConfig& config);

    std::optional<Alert> process(const SiemEvent& event);

    CacheStats cache_stats() const;
    const PipelineConfig& config() const { return config_; }

  private:
    const std::vector<RuleDefinition>* ruleset_;
    const ClassifierBundle* bundle_;
    PipelineConfig config_;
    std::optional<ResultCache> cache_;
};

// JSONL in, alert JSONL out. With workers > 1 events are scored in parallel;
// alert order still follows input order.
RunMetrics run_stream(std::istream& events, std::ostream& alerts,
                      const std::vector<RuleDefinition>* ruleset,
                      const ClassifierBundle* bundle, const PipelineConfig& config,
                      std::ostream* metrics_every = nullptr,
                      std::uint64_t metrics_interval = 0);

// In-memory replay used by benchmarks and the harness.
RunMetrics replay_events(std::span<const SiemEvent> events,
                         DetectionPipeline& pipeline,
                         std::vector<Alert>* alerts_out = nullptr);

}  // namespace amides
