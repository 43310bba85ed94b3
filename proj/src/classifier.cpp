#include "amides/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace amides {

Calibration calibrate(const std::vector<double>& benign_scores,
                      const std::vector<double>& malicious_scores, double n_per_day,
                      double days, double epsilon) {
    if (benign_scores.empty())
        throw EmptyScoresError("calibration needs benign training scores");
    if (n_per_day < 0.0) throw OutOfRangeError("false-alert budget must be >= 0");
    if (days <= 0.0) throw OutOfRangeError("training span must be positive");
    if (epsilon <= 0.0) throw OutOfRangeError("epsilon must be positive");

    Calibration cal;
    cal.n_per_day = n_per_day;
    cal.days = days;
    cal.epsilon = epsilon;

    std::vector<double> sorted = benign_scores;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const std::size_t budget =
        static_cast<std::size_t>(std::floor(n_per_day * days));
    if (budget == 0) cal.raw_default = sorted.front() + epsilon;
    else if (budget >= sorted.size()) cal.raw_default = sorted.back() - epsilon;
    else cal.raw_default = sorted[budget];

    // Exact MCC sweep at midpoints between adjacent distinct combined scores;
    // MCC is piecewise constant between scores, so this loses nothing.
    bool found = false;
    double lo = 0.0, hi = 0.0;
    if (!malicious_scores.empty()) {
        std::vector<double> combined;
        combined.reserve(benign_scores.size() + malicious_scores.size());
        combined.insert(combined.end(), benign_scores.begin(), benign_scores.end());
        combined.insert(combined.end(), malicious_scores.begin(),
                        malicious_scores.end());
        std::sort(combined.begin(), combined.end());
        combined.erase(std::unique(combined.begin(), combined.end()), combined.end());

        std::vector<double> scores;
        std::vector<Label> labels;
        scores.reserve(benign_scores.size() + malicious_scores.size());
        for (double s : benign_scores) {
            scores.push_back(s);
            labels.push_back(Label::benign);
        }
        for (double s : malicious_scores) {
            scores.push_back(s);
            labels.push_back(Label::malicious);
        }

        double run_lo = 0.0, run_hi = 0.0;
        bool in_run = false;
        auto close_run = [&] {
            if (in_run && (!found || run_hi - run_lo > hi - lo)) {
                lo = run_lo;
                hi = run_hi;
                found = true;
            }
            in_run = false;
        };
        for (std::size_t i = 0; i + 1 < combined.size(); ++i) {
            const double mid = combined[i] + (combined[i + 1] - combined[i]) / 2.0;
            if (compute_metrics(scores, labels, mid).mcc >= 0.1) {
                if (!in_run) {
                    run_lo = mid;
                    in_run = true;
                }
                run_hi = mid;
            } else {
                close_run();
            }
        }
        close_run();
    }

    if (!found) {
        cal.raw_lo = cal.raw_default - 1.0;
        cal.raw_hi = cal.raw_default + 1.0;
        cal.fallback_range = true;
    } else {
        cal.raw_lo = std::min(lo, cal.raw_default - epsilon);
        cal.raw_hi = std::max(hi, cal.raw_default + epsilon);
    }
    return cal;
}

double unit_to_raw(const Calibration& calibration, double unit) {
    if (unit < 0.0 || unit > 1.0)
        throw OutOfRangeError("unit threshold " + format_double(unit) +
                              " outside [0, 1]");
    // 0.5 takes the upper branch so the anchor maps to raw_default exactly.
    if (unit < 0.5)
        return calibration.raw_lo +
               (unit / 0.5) * (calibration.raw_default - calibration.raw_lo);
    return calibration.raw_default +
           ((unit - 0.5) / 0.5) * (calibration.raw_hi - calibration.raw_default);
}

double raw_to_unit(const Calibration& calibration, double raw) {
    if (raw <= calibration.raw_default)
        return 0.5 * (raw - calibration.raw_lo) /
               (calibration.raw_default - calibration.raw_lo);
    return 0.5 + 0.5 * (raw - calibration.raw_default) /
                     (calibration.raw_hi - calibration.raw_default);
}

ResultCache::ResultCache(std::size_t capacity, std::size_t shards)
    : capacity_(capacity), shards_(std::max<std::size_t>(shards, 1)) {
    per_shard_capacity_ = capacity_ / shards_.size();
    if (capacity_ > 0 && per_shard_capacity_ == 0) per_shard_capacity_ = 1;
}

ResultCache::Shard& ResultCache::shard_for(const std::string& key) {
    if (shards_.size() == 1) return shards_[0];
    return shards_[fnv1a64(key) % shards_.size()];
}

std::optional<CacheEntry> ResultCache::get(const std::string& key) {
    Shard& shard = shard_for(key);
    std::lock_guard lock(shard.mutex);
    auto it = shard.index.find(key);
    if (it == shard.index.end()) {
        ++shard.stats.misses;
        return std::nullopt;
    }
    shard.order.splice(shard.order.begin(), shard.order, it->second);
    ++shard.stats.hits;
    return it->second->second;
}

void ResultCache::put(const std::string& key, CacheEntry entry) {
    if (capacity_ == 0) return;
    Shard& shard = shard_for(key);
    std::lock_guard lock(shard.mutex);
    auto it = shard.index.find(key);
    if (it != shard.index.end()) {
        it->second->second = std::move(entry);
        shard.order.splice(shard.order.begin(), shard.order, it->second);
        return;
    }
    shard.order.emplace_front(key, std::move(entry));
    shard.index[key] = shard.order.begin();
    if (shard.index.size() > per_shard_capacity_) {
        shard.index.erase(shard.order.back().first);
        shard.order.pop_back();
        ++shard.stats.evictions;
    }
}

void ResultCache::store_attribution(const std::string& key, const AttributionList& list) {
    Shard& shard = shard_for(key);
    std::lock_guard lock(shard.mutex);
    auto it = shard.index.find(key);
    if (it == shard.index.end()) return;
    it->second->second.attribution = list;
}

CacheStats ResultCache::stats() const {
    CacheStats total;
    for (const Shard& shard : shards_) {
        std::lock_guard lock(shard.mutex);
        total.hits += shard.stats.hits;
        total.misses += shard.stats.misses;
        total.evictions += shard.stats.evictions;
    }
    return total;
}

std::size_t ResultCache::size() const {
    std::size_t n = 0;
    for (const Shard& shard : shards_) {
        std::lock_guard lock(shard.mutex);
        n += shard.index.size();
    }
    return n;
}

Classification classify(const ClassifierBundle& bundle, std::string_view text,
                        double unit_threshold, ResultCache* cache) {
    Classification result;
    TokenSequence tokens = pipeline_tokens(text);
    result.key = canonical_key(tokens);
    bool have_score = false;
    if (cache) {
        if (auto entry = cache->get(result.key)) {
            result.raw_score = entry->raw_score;
            result.cached = true;
            have_score = true;
        }
    }
    if (!have_score) {
        SparseFeatureVector v = vectorize(tokens, bundle.idf);
        result.raw_score = decision_value(bundle.model, v);
        if (cache) cache->put(result.key, {result.raw_score, std::nullopt});
    }
    result.evasion = result.raw_score > unit_to_raw(bundle.calibration, unit_threshold);
    return result;
}

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json model_to_json(const LinearModel& model) {
    ordered_json doc;
    doc["weights"] = model.weights;
    doc["bias"] = model.bias;
    doc["c"] = model.c;
    doc["balanced"] = model.balanced;
    doc["meta"] = {{"n_benign", model.meta.n_benign},
                   {"n_malicious", model.meta.n_malicious},
                   {"seed", model.meta.seed},
                   {"tol", model.meta.tol},
                   {"max_iter", model.meta.max_iter},
                   {"iterations_used", model.meta.iterations_used},
                   {"converged", model.meta.converged}};
    return doc;
}

LinearModel model_from_json(const ordered_json& doc) {
    LinearModel model;
    model.weights = doc.at("weights").get<std::vector<double>>();
    model.bias = doc.at("bias").get<double>();
    model.c = doc.at("c").get<double>();
    model.balanced = doc.at("balanced").get<bool>();
    const auto& meta = doc.at("meta");
    model.meta.n_benign = meta.at("n_benign").get<std::size_t>();
    model.meta.n_malicious = meta.at("n_malicious").get<std::size_t>();
    model.meta.seed = meta.at("seed").get<std::uint64_t>();
    model.meta.tol = meta.at("tol").get<double>();
    model.meta.max_iter = meta.at("max_iter").get<std::size_t>();
    model.meta.iterations_used = meta.at("iterations_used").get<std::size_t>();
    model.meta.converged = meta.at("converged").get<bool>();
    return model;
}

}  // namespace

void save_bundle(const ClassifierBundle& bundle, std::ostream& out) {
    ordered_json payload;
    payload["format_version"] = bundle.meta.format_version;
    payload["created_at"] = bundle.meta.created_at;
    payload["ruleset_fingerprint"] = bundle.meta.ruleset_fingerprint;
    payload["selector"] = {{"event_type", to_string(bundle.selector.event_type)},
                           {"event_fields", bundle.selector.event_fields},
                           {"rule_fields", bundle.selector.rule_fields}};
    payload["vocabulary"] = bundle.idf.terms;
    payload["idf"] = bundle.idf.idf;
    payload["corpus_size"] = bundle.idf.corpus_size;
    payload["model"] = model_to_json(bundle.model);
    payload["calibration"] = {{"raw_default", bundle.calibration.raw_default},
                              {"raw_lo", bundle.calibration.raw_lo},
                              {"raw_hi", bundle.calibration.raw_hi},
                              {"n_per_day", bundle.calibration.n_per_day},
                              {"days", bundle.calibration.days},
                              {"epsilon", bundle.calibration.epsilon},
                              {"fallback_range", bundle.calibration.fallback_range}};
    if (bundle.attribution) {
        ordered_json attribution;
        attribution["c"] = bundle.attribution->c;
        attribution["balanced"] = bundle.attribution->balanced;
        attribution["skipped"] = bundle.attribution->skipped_rules;
        ordered_json models = ordered_json::array();
        for (const auto& [rule_id, model] : bundle.attribution->per_rule) {
            ordered_json entry = model_to_json(model);
            entry["rule_id"] = rule_id;
            models.push_back(std::move(entry));
        }
        attribution["models"] = std::move(models);
        payload["attribution"] = std::move(attribution);
    } else {
        payload["attribution"] = nullptr;
    }

    const std::string payload_text = payload.dump();
    ordered_json doc;
    doc["format"] = "amides-bundle";
    doc["version"] = bundle.meta.format_version;
    doc["checksum"] = to_hex64(fnv1a64(payload_text));
    doc["payload"] = std::move(payload);
    out << doc.dump() << '\n';
}

void save_bundle_file(const ClassifierBundle& bundle, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write bundle file: " + path);
    save_bundle(bundle, out);
}

ClassifierBundle load_bundle(std::istream& in) {
    ordered_json doc = ordered_json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        throw CorruptBundleError("bundle is not a JSON object");
    if (!doc.contains("format") || doc["format"] != "amides-bundle")
        throw CorruptBundleError("missing amides-bundle format marker");
    if (!doc.contains("version") || !doc["version"].is_number_unsigned())
        throw CorruptBundleError("missing bundle version");
    if (doc["version"].get<std::uint32_t>() != kBundleFormatVersion)
        throw VersionMismatchError("unsupported bundle version " +
                                   doc["version"].dump());
    if (!doc.contains("payload") || !doc["payload"].is_object())
        throw CorruptBundleError("missing bundle payload");
    const std::string payload_text = doc["payload"].dump();
    if (!doc.contains("checksum") || doc["checksum"] != to_hex64(fnv1a64(payload_text)))
        throw CorruptBundleError("bundle checksum mismatch");

    const ordered_json& payload = doc["payload"];
    ClassifierBundle bundle;
    try {
        bundle.meta.format_version = payload.at("format_version").get<std::uint32_t>();
        bundle.meta.created_at = payload.at("created_at").get<std::string>();
        bundle.meta.ruleset_fingerprint =
            payload.at("ruleset_fingerprint").get<std::string>();
        const auto& selector = payload.at("selector");
        auto type = event_type_from_string(selector.at("event_type").get<std::string>());
        if (!type) throw CorruptBundleError("unknown selector event type");
        bundle.selector.event_type = *type;
        bundle.selector.event_fields =
            selector.at("event_fields").get<std::vector<std::string>>();
        bundle.selector.rule_fields =
            selector.at("rule_fields").get<std::vector<std::string>>();
        bundle.idf.terms = payload.at("vocabulary").get<std::vector<std::string>>();
        bundle.idf.idf = payload.at("idf").get<std::vector<double>>();
        bundle.idf.corpus_size = payload.at("corpus_size").get<std::uint64_t>();
        if (bundle.idf.terms.size() != bundle.idf.idf.size())
            throw CorruptBundleError("vocabulary and idf arrays disagree");
        bundle.idf.rebuild_vocabulary();
        bundle.model = model_from_json(payload.at("model"));
        const auto& calibration = payload.at("calibration");
        bundle.calibration.raw_default = calibration.at("raw_default").get<double>();
        bundle.calibration.raw_lo = calibration.at("raw_lo").get<double>();
        bundle.calibration.raw_hi = calibration.at("raw_hi").get<double>();
        bundle.calibration.n_per_day = calibration.at("n_per_day").get<double>();
        bundle.calibration.days = calibration.at("days").get<double>();
        bundle.calibration.epsilon = calibration.at("epsilon").get<double>();
        bundle.calibration.fallback_range =
            calibration.at("fallback_range").get<bool>();
        if (payload.contains("attribution") && !payload["attribution"].is_null()) {
            const auto& attribution = payload["attribution"];
            AttributionModel model;
            model.c = attribution.at("c").get<double>();
            model.balanced = attribution.at("balanced").get<bool>();
            model.skipped_rules =
                attribution.at("skipped").get<std::vector<std::string>>();
            for (const auto& entry : attribution.at("models"))
                model.per_rule.emplace_back(entry.at("rule_id").get<std::string>(),
                                            model_from_json(entry));
            bundle.attribution = std::move(model);
        }
    } catch (const ordered_json::exception& e) {
        throw CorruptBundleError(std::string("malformed bundle payload: ") + e.what());
    }
    return bundle;
}

ClassifierBundle load_bundle_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open bundle file: " + path);
    return load_bundle(in);
}

}  // namespace amides
