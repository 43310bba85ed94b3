#include "amides/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace amides {

std::vector<MaliciousDoc> rule_term_docs(const std::vector<RuleDefinition>& ruleset,
                                         const FieldSelector& selector,
                                         TrainerReport* report) {
    std::vector<MaliciousDoc> docs;
    for (const RuleDefinition& rule : ruleset) {
        if (rule.event_type != selector.event_type) continue;
        if (report) ++report->rules_total;
        RuleTermSet terms = extract_rule_terms(rule, selector);
        if (terms.terms.empty()) {
            if (report) report->rules_without_terms.push_back(rule.id);
            continue;
        }
        if (report) ++report->rules_with_terms;
        for (std::string& term : terms.terms) docs.push_back({std::move(term), rule.id});
    }
    return docs;
}

namespace {

double derive_days(const std::vector<SiemEvent>& events) {
    std::int64_t lo = 0, hi = 0;
    bool any = false;
    for (const SiemEvent& event : events) {
        if (!event.timestamp) continue;
        auto ts = parse_iso8601(*event.timestamp);
        if (!ts) continue;
        if (!any) {
            lo = hi = *ts;
            any = true;
        } else {
            lo = std::min(lo, *ts);
            hi = std::max(hi, *ts);
        }
    }
    if (!any || hi <= lo) return 1.0;
    return std::max(1.0, std::ceil(static_cast<double>(hi - lo) / 86400.0));
}

}  // namespace

TrainerResult train_bundle_from_docs(const std::vector<SiemEvent>& benign,
                                     const std::vector<MaliciousDoc>& docs,
                                     const std::vector<RuleDefinition>& ruleset,
                                     const FieldSelector& selector,
                                     const TrainerOptions& options) {
    TrainerResult result;
    TrainerReport& report = result.report;

    std::vector<TokenSequence> benign_tokens;
    benign_tokens.reserve(benign.size());
    for (const SiemEvent& event : benign) {
        if (event.event_type != selector.event_type) continue;
        benign_tokens.push_back(pipeline_tokens(extract_text(event, selector)));
    }
    report.benign_events = benign_tokens.size();
    report.malicious_docs = docs.size();
    if (benign_tokens.empty()) throw EmptyCorpusError("no benign training events");
    if (docs.empty()) throw EmptyCorpusError("no malicious training documents");

    // idf is fit on the full pre-dedupe corpus; deduplication below applies to
    // the vectorized training set only.
    std::vector<TokenSequence> corpus = benign_tokens;
    corpus.reserve(corpus.size() + docs.size());
    std::vector<TokenSequence> doc_tokens;
    doc_tokens.reserve(docs.size());
    for (const MaliciousDoc& doc : docs) {
        doc_tokens.push_back(pipeline_tokens(doc.text));
        corpus.push_back(doc_tokens.back());
    }
    IdfModel idf = fit_idf(corpus);

    TrainingSet raw;
    raw.vectors.reserve(corpus.size());
    std::vector<double> benign_scores, malicious_scores;
    for (const TokenSequence& tokens : benign_tokens) {
        raw.vectors.push_back(vectorize(tokens, idf));
        raw.labels.push_back(Label::benign);
    }
    for (const TokenSequence& tokens : doc_tokens) {
        raw.vectors.push_back(vectorize(tokens, idf));
        raw.labels.push_back(Label::malicious);
    }
    TrainingSet training = dedupe(raw, &report.dedupe);
    report.training_rows = training.size();

    GridSearchResult best = grid_search(training, options.grid, options.folds,
                                        options.seed, options.tol, options.max_iter);
    report.cv = best.report;
    report.chosen_c = best.c;
    report.chosen_balanced = best.balanced;
    report.converged = best.model.meta.converged;

    // Calibration quantiles are per event, so duplicates count.
    benign_scores.reserve(benign_tokens.size());
    for (std::size_t i = 0; i < benign_tokens.size(); ++i)
        benign_scores.push_back(decision_value(best.model, raw.vectors[i]));
    for (std::size_t i = benign_tokens.size(); i < raw.size(); ++i)
        malicious_scores.push_back(decision_value(best.model, raw.vectors[i]));

    report.derived_days = options.days > 0.0 ? options.days : derive_days(benign);
    Calibration calibration =
        calibrate(benign_scores, malicious_scores, options.n_per_day,
                  report.derived_days, options.epsilon);

    ClassifierBundle bundle;
    bundle.idf = std::move(idf);
    bundle.model = std::move(best.model);
    bundle.calibration = calibration;
    bundle.selector = selector;
    bundle.meta.format_version = kBundleFormatVersion;
    bundle.meta.created_at = options.created_at;
    std::vector<RuleDefinition> typed_rules;
    for (const RuleDefinition& rule : ruleset)
        if (rule.event_type == selector.event_type) typed_rules.push_back(rule);
    bundle.meta.ruleset_fingerprint = ruleset_fingerprint(typed_rules);

    if (options.with_attribution) {
        std::vector<RuleTermSet> term_sets;
        std::map<std::string, std::size_t> by_rule;
        for (const MaliciousDoc& doc : docs) {
            auto [it, inserted] = by_rule.emplace(doc.rule_id, term_sets.size());
            if (inserted) term_sets.push_back({doc.rule_id, {}});
            term_sets[it->second].terms.push_back(doc.text);
        }
        std::vector<SparseFeatureVector> benign_unique;
        for (std::size_t i = 0; i < training.size(); ++i)
            if (training.labels[i] == Label::benign)
                benign_unique.push_back(training.vectors[i]);
        bundle.attribution = train_attribution(
            term_sets, bundle.idf, benign_unique, best.c, best.balanced, options.tol,
            options.max_iter, mix_seed(options.seed, 0xA77));
        report.attribution_skipped = bundle.attribution->skipped_rules;
    }

    result.bundle = std::move(bundle);
    return result;
}

TrainerResult train_bundle(const std::vector<RuleDefinition>& ruleset,
                           const std::vector<SiemEvent>& benign,
                           const FieldSelector& selector, const TrainerOptions& options) {
    TrainerReport term_report;
    std::vector<MaliciousDoc> docs = rule_term_docs(ruleset, selector, &term_report);
    TrainerResult result =
        train_bundle_from_docs(benign, docs, ruleset, selector, options);
    result.report.rules_total = term_report.rules_total;
    result.report.rules_with_terms = term_report.rules_with_terms;
    result.report.rules_without_terms = term_report.rules_without_terms;
    return result;
}

TrainerResult train_benchmark_bundle(const std::vector<RuleDefinition>& ruleset,
                                     const std::vector<SiemEvent>& benign,
                                     const std::vector<SiemEvent>& matches,
                                     const FieldSelector& selector,
                                     const TrainerOptions& options) {
    std::vector<RuleDefinition> typed_rules;
    for (const RuleDefinition& rule : ruleset)
        if (rule.event_type == selector.event_type) typed_rules.push_back(rule);

    std::vector<MaliciousDoc> docs;
    for (const SiemEvent& event : matches) {
        if (event.event_type != selector.event_type) continue;
        std::vector<std::string> matched = match_all(typed_rules, event);
        docs.push_back({extract_text(event, selector),
                        matched.empty() ? std::string() : matched.front()});
    }
    TrainerResult result =
        train_bundle_from_docs(benign, docs, ruleset, selector, options);
    result.report.rules_total = typed_rules.size();
    return result;
}

}  // namespace amides
