#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "amides/pipeline.hpp"
#include "amides/trainer.hpp"

namespace amides {

// Ground truth sidecar: one JSON object per line, {"id", "label", "rule_id"?}.
struct EventLabel {
    std::string label;  // "benign" | "match" | "evasion"
    std::string rule_id;
};

std::map<std::string, EventLabel> load_labels(const std::string& path);

struct LabeledEvents {
    std::vector<SiemEvent> benign;
    std::vector<SiemEvent> matches;
    std::vector<SiemEvent> evasions;
    std::map<std::string, std::string> evasion_rule;  // event id -> evaded rule
    std::map<std::string, std::string> match_rule;
};

LabeledEvents split_by_label(const std::vector<SiemEvent>& events,
                             const std::map<std::string, EventLabel>& labels);

// Earlier half of the time span (strictly before midpoint) goes to training.
void split_by_time(const std::vector<SiemEvent>& events,
                   std::vector<SiemEvent>& earlier, std::vector<SiemEvent>& later);

struct SweepRow {
    double unit_threshold = 0.0;
    double raw_threshold = 0.0;
    Metrics metrics;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    std::uint64_t dataset_fingerprint = 0;
};

// Scores benign + evasion validation events with the bundle and evaluates the
// confusion matrix on a unit threshold grid (uniform steps plus, optionally,
// every benign score's exact unit position, capturing precision transitions).
SweepReport sweep_thresholds(const ClassifierBundle& bundle,
                             const std::vector<SiemEvent>& benign,
                             const std::vector<SiemEvent>& evasions,
                             std::size_t grid_points = 101,
                             bool insert_breakpoints = true);

void write_sweep_csv(const SweepReport& report, std::ostream& out);
std::string sweep_to_json(const SweepReport& report);

// Baseline comparison: same training procedure, but the malicious class is
// the matching events themselves instead of the rules' search terms.
SweepReport benchmark_mode(const std::vector<RuleDefinition>& ruleset,
                           const std::vector<SiemEvent>& benign_train,
                           const std::vector<SiemEvent>& benign_validate,
                           const std::vector<SiemEvent>& matches,
                           const std::vector<SiemEvent>& evasions,
                           const FieldSelector& selector, const TrainerOptions& options);

struct TaintRun {
    double fraction = 0.0;
    std::size_t run = 0;
    std::size_t tainted = 0;
    SweepReport sweep;
};

struct TaintReport {
    std::vector<double> fractions;
    std::size_t runs_per_fraction = 0;
    std::vector<TaintRun> runs;
    // fraction -> mean metrics over runs, aligned on the uniform grid.
    std::vector<SweepReport> mean_by_fraction;
};

// Re-trains with `fraction` of the evasions injected into the benign training
// class (sampled per run), evaluating on the untainted validation split.
TaintReport taint_experiment(const std::vector<RuleDefinition>& ruleset,
                             const std::vector<SiemEvent>& benign_train,
                             const std::vector<SiemEvent>& benign_validate,
                             const std::vector<SiemEvent>& evasions,
                             const FieldSelector& selector,
                             const TrainerOptions& options,
                             const std::vector<double>& fractions,
                             std::size_t runs_per_fraction, std::uint64_t seed);

void write_taint_csv(const TaintReport& report, std::ostream& out);
std::string taint_to_json(const TaintReport& report);

struct RankHistogram {
    std::vector<std::size_t> counts;  // counts[r-1] = evasions attributed rank r
    std::size_t beyond = 0;           // truth absent from the returned list
    std::size_t detected = 0;
    std::size_t undetected = 0;

    double cumulative_fraction(std::size_t up_to_rank) const;
};

// Ranks of each detected evasion's true rule in the attribution output.
RankHistogram attribution_ranks(const ClassifierBundle& bundle,
                                const std::vector<SiemEvent>& evasions,
                                const std::map<std::string, std::string>& truth,
                                double unit_threshold = 0.5, std::size_t top_n = 10);

void write_ranks_csv(const RankHistogram& histogram, std::ostream& out);
std::string ranks_to_json(const RankHistogram& histogram);

struct BenignTemplate {
    EventType event_type = EventType::process_creation;
    std::string field;  // receives the rendered template
    std::string image;  // optional second field for process events
    std::string text;   // placeholders: {num10} {hex8} {word} {path} {host} {user}
    std::size_t weight = 1;
};

std::vector<BenignTemplate> load_templates(const std::string& path);
std::vector<BenignTemplate> default_templates();

struct SynthOptions {
    std::size_t volume = 10000;
    std::uint64_t seed = 7;
    std::string start_time = "2022-05-02T00:00:00Z";
    double span_days = 28.0;
};

// Deterministic benign stream: template mix fixed by ordinal, placeholder
// values drawn from a per-event rng, evenly spaced timestamps.
std::vector<SiemEvent> synth_benign(const std::vector<BenignTemplate>& templates,
                                    const SynthOptions& options);

struct ThroughputResult {
    RunMetrics metrics;
    double cache_hit_rate = 0.0;
    double mean_event_us = 0.0;
    double stddev_event_us = 0.0;  // over timed chunks; 0 when multi-worker
};

std::string throughput_to_json(const ThroughputResult& result);

ThroughputResult bench_throughput(const ClassifierBundle& bundle,
                                  std::span<const SiemEvent> events,
                                  const PipelineConfig& config);

}  // namespace amides
