#pragma once

#include <string>
#include <vector>

#include "amides/classifier.hpp"
#include "amides/rules.hpp"

namespace amides {

// A malicious training document: rule terms in the standard mode, matching
// event text in benchmark mode.
struct MaliciousDoc {
    std::string text;
    std::string rule_id;
};

struct TrainerOptions {
    std::uint64_t seed = 42;
    std::size_t folds = 5;
    HyperGrid grid;
    double tol = 1e-4;
    std::size_t max_iter = 10000;
    double n_per_day = 0.0;
    double days = 0.0;  // <= 0: derive from benign timestamps, floor 1
    double epsilon = 1e-6;
    bool with_attribution = true;
    std::string created_at;
};

struct TrainerReport {
    std::size_t rules_total = 0;
    std::size_t rules_with_terms = 0;
    std::vector<std::string> rules_without_terms;
    std::size_t benign_events = 0;
    std::size_t malicious_docs = 0;
    std::size_t training_rows = 0;  // after dedupe
    DedupeReport dedupe;
    CvReport cv;
    double chosen_c = 1.0;
    bool chosen_balanced = false;
    double derived_days = 1.0;
    std::vector<std::string> attribution_skipped;
    bool converged = true;
};

struct TrainerResult {
    ClassifierBundle bundle;
    TrainerReport report;
};

// Term documents for every ruleset rule of the selector's event type.
std::vector<MaliciousDoc> rule_term_docs(const std::vector<RuleDefinition>& ruleset,
                                         const FieldSelector& selector,
                                         TrainerReport* report = nullptr);

// Shared trainer: fits idf on benign texts + malicious docs, vectorizes,
// dedupes, grid-searches, calibrates and (optionally) trains attribution.
TrainerResult train_bundle_from_docs(const std::vector<SiemEvent>& benign,
                                     const std::vector<MaliciousDoc>& docs,
                                     const std::vector<RuleDefinition>& ruleset,
                                     const FieldSelector& selector,
                                     const TrainerOptions& options);

// Standard mode: malicious class = extracted rule terms.
TrainerResult train_bundle(const std::vector<RuleDefinition>& ruleset,
                           const std::vector<SiemEvent>& benign,
                           const FieldSelector& selector, const TrainerOptions& options);

// Benchmark mode: malicious class = matching events (classic misuse learning).
TrainerResult train_benchmark_bundle(const std::vector<RuleDefinition>& ruleset,
                                     const std::vector<SiemEvent>& benign,
                                     const std::vector<SiemEvent>& matches,
                                     const FieldSelector& selector,
                                     const TrainerOptions& options);

}  // namespace amides
