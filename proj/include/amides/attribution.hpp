#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "amides/learner.hpp"
#include "amides/rules.hpp"

namespace amides {

struct AttributionEntry {
    std::string rule_id;
    std::string title;
    double confidence = 0.0;

    bool operator==(const AttributionEntry&) const = default;
};

struct AttributionList {
    std::vector<AttributionEntry> ranked;

    bool operator==(const AttributionList&) const = default;
};

struct AttributionModel {
    // Sorted by rule_id so serialization and evaluation order are stable.
    std::vector<std::pair<std::string, LinearModel>> per_rule;
    std::vector<std::string> skipped_rules;
    double c = 1.0;
    bool balanced = false;

    const LinearModel* find(std::string_view rule_id) const;
};

// One classifier per rule: that rule's term vectors against the shared benign
// vectors, with C/balanced inherited from the misuse model. Rules whose terms
// all prune away are skipped and reported.
AttributionModel train_attribution(const std::vector<RuleTermSet>& term_sets,
                                   const IdfModel& idf,
                                   const std::vector<SparseFeatureVector>& benign,
                                   double c, bool balanced, double tol = 1e-4,
                                   std::size_t max_iter = 10000,
                                   std::uint64_t seed = 1);

// Rules ordered by decision value, descending; ties broken by rule_id. Titles
// are filled from the ruleset when provided.
AttributionList attribute(const AttributionModel& model, const SparseFeatureVector& v,
                          std::size_t top_n = 10,
                          const std::vector<RuleDefinition>* ruleset = nullptr);

// 1-based rank of rule_id in the list, if present.
std::optional<std::size_t> rank_of(const AttributionList& list, std::string_view rule_id);

}  // namespace amides
