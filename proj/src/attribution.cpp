#include "amides/attribution.hpp"

#include <algorithm>

namespace amides {

const LinearModel* AttributionModel::find(std::string_view rule_id) const {
    for (const auto& [id, model] : per_rule)
        if (id == rule_id) return &model;
    return nullptr;
}

AttributionModel train_attribution(const std::vector<RuleTermSet>& term_sets,
                                   const IdfModel& idf,
                                   const std::vector<SparseFeatureVector>& benign,
                                   double c, bool balanced, double tol,
                                   std::size_t max_iter, std::uint64_t seed) {
    AttributionModel model;
    model.c = c;
    model.balanced = balanced;

    std::vector<RuleTermSet> ordered = term_sets;
    std::sort(ordered.begin(), ordered.end(),
              [](const RuleTermSet& a, const RuleTermSet& b) {
                  return a.rule_id < b.rule_id;
              });

    for (const RuleTermSet& terms : ordered) {
        std::vector<SparseFeatureVector> malicious;
        for (const std::string& term : terms.terms) {
            SparseFeatureVector v = vectorize(pipeline_tokens(term), idf);
            if (!v.entries.empty()) malicious.push_back(std::move(v));
        }
        if (malicious.empty()) {
            model.skipped_rules.push_back(terms.rule_id);
            continue;
        }
        TrainingSet set;
        set.vectors = benign;
        set.labels.assign(benign.size(), Label::benign);
        for (SparseFeatureVector& v : malicious) {
            set.vectors.push_back(std::move(v));
            set.labels.push_back(Label::malicious);
        }
        model.per_rule.emplace_back(
            terms.rule_id,
            train_linear_svm(set, {c, balanced, tol, max_iter,
                                   mix_seed(seed, fnv1a64(terms.rule_id))}));
    }
    return model;
}

AttributionList attribute(const AttributionModel& model, const SparseFeatureVector& v,
                          std::size_t top_n,
                          const std::vector<RuleDefinition>* ruleset) {
    AttributionList list;
    list.ranked.reserve(model.per_rule.size());
    for (const auto& [rule_id, rule_model] : model.per_rule) {
        AttributionEntry entry;
        entry.rule_id = rule_id;
        entry.confidence = decision_value(rule_model, v);
        if (ruleset) {
            for (const RuleDefinition& rule : *ruleset)
                if (rule.id == rule_id) {
                    entry.title = rule.title;
                    break;
                }
        }
        list.ranked.push_back(std::move(entry));
    }
    std::sort(list.ranked.begin(), list.ranked.end(),
              [](const AttributionEntry& a, const AttributionEntry& b) {
                  if (a.confidence != b.confidence) return a.confidence > b.confidence;
                  return a.rule_id < b.rule_id;
              });
    if (list.ranked.size() > top_n) list.ranked.resize(top_n);
    return list;
}

std::optional<std::size_t> rank_of(const AttributionList& list,
                                   std::string_view rule_id) {
    for (std::size_t i = 0; i < list.ranked.size(); ++i)
        if (list.ranked[i].rule_id == rule_id) return i + 1;
    return std::nullopt;
}

}  // namespace amides
