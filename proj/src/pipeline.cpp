#include "amides/pipeline.hpp"

#include <chrono>
#include <istream>
#include <ostream>
#include <thread>
#include <unordered_map>

#include <json.hpp>

namespace amides {

namespace {

using ordered_json = nlohmann::ordered_json;

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
}

}  // namespace

std::string serialize_alert(const Alert& alert) {
    ordered_json doc;
    doc["event_id"] = alert.event_id;
    if (alert.timestamp) doc["timestamp"] = *alert.timestamp;
    ordered_json matches = ordered_json::array();
    for (const RuleMatchRef& match : alert.rule_matches)
        matches.push_back({{"rule_id", match.rule_id}, {"title", match.title}});
    doc["rule_matches"] = std::move(matches);
    if (alert.evasion) {
        ordered_json attribution = ordered_json::array();
        for (const AttributionEntry& entry : alert.evasion->attribution.ranked)
            attribution.push_back({{"rule_id", entry.rule_id},
                                   {"title", entry.title},
                                   {"confidence", entry.confidence}});
        doc["evasion"] = {{"raw_score", alert.evasion->raw_score},
                          {"threshold", alert.evasion->threshold},
                          {"attribution", std::move(attribution)}};
    } else {
        doc["evasion"] = nullptr;
    }
    return doc.dump();
}

std::string serialize_metrics(const RunMetrics& metrics) {
    ordered_json doc;
    doc["events_total"] = metrics.events_total;
    doc["alerts_total"] = metrics.alerts_total;
    doc["rule_match_alerts"] = metrics.rule_match_alerts;
    doc["evasion_alerts"] = metrics.evasion_alerts;
    doc["cache_hits"] = metrics.cache_hits;
    doc["cache_misses"] = metrics.cache_misses;
    doc["evictions"] = metrics.evictions;
    doc["malformed_lines"] = metrics.malformed_lines;
    doc["wall_seconds"] = metrics.wall_seconds;
    doc["events_per_second"] = metrics.events_per_second;
    return doc.dump();
}

DetectionPipeline::DetectionPipeline(const std::vector<RuleDefinition>* ruleset,
                                     const ClassifierBundle* bundle,
                                     const PipelineConfig& config)
    : ruleset_(ruleset), bundle_(bundle), config_(config) {
    if (bundle_ && config_.cache_capacity > 0)
        cache_.emplace(config_.cache_capacity, config_.cache_shards);
    // Validates the threshold once up front instead of per event.
    if (bundle_) unit_to_raw(bundle_->calibration, config_.unit_threshold);
}

std::optional<Alert> DetectionPipeline::process(const SiemEvent& event) {
    Alert alert;
    alert.event_id = event.id;
    alert.timestamp = event.timestamp;

    if (ruleset_) {
        for (const RuleDefinition& rule : *ruleset_) {
            if (rule.event_type != event.event_type) continue;
            if (match_event(rule, event))
                alert.rule_matches.push_back({rule.id, rule.title});
        }
    }

    if (bundle_ && event.event_type == bundle_->selector.event_type) {
        std::string text;
        bool have_text = true;
        try {
            text = extract_text(event, bundle_->selector);
        } catch (const AllFieldsMissingError&) {
            have_text = false;
        }
        if (have_text) {
            TokenSequence tokens = pipeline_tokens(text);
            const std::string key = canonical_key(tokens);

            std::optional<CacheEntry> entry;
            if (cache_) entry = cache_->get(key);
            double raw;
            std::optional<AttributionList> attribution;
            SparseFeatureVector v;
            bool have_vector = false;
            if (entry) {
                raw = entry->raw_score;
                attribution = entry->attribution;
            } else {
                v = vectorize(tokens, bundle_->idf);
                have_vector = true;
                raw = decision_value(bundle_->model, v);
            }

            const bool evasion =
                raw > unit_to_raw(bundle_->calibration, config_.unit_threshold);
            if (evasion && bundle_->attribution && !attribution) {
                if (!have_vector) v = vectorize(tokens, bundle_->idf);
                attribution =
                    attribute(*bundle_->attribution, v, config_.top_n, ruleset_);
                if (cache_ && entry) cache_->store_attribution(key, *attribution);
            }
            if (cache_ && !entry) cache_->put(key, {raw, attribution});

            if (evasion) {
                EvasionVerdict verdict;
                verdict.raw_score = raw;
                verdict.threshold = config_.unit_threshold;
                if (attribution) verdict.attribution = *attribution;
                alert.evasion = std::move(verdict);
            }
        }
    }

    if (alert.rule_matches.empty() && !alert.evasion) return std::nullopt;
    return alert;
}

CacheStats DetectionPipeline::cache_stats() const {
    return cache_ ? cache_->stats() : CacheStats{};
}

namespace {

void tally_alert(RunMetrics& metrics, const Alert& alert) {
    ++metrics.alerts_total;
    if (!alert.rule_matches.empty()) ++metrics.rule_match_alerts;
    if (alert.evasion) ++metrics.evasion_alerts;
}

void finish_metrics(RunMetrics& metrics, const CacheStats& stats, double wall) {
    metrics.cache_hits = stats.hits;
    metrics.cache_misses = stats.misses;
    metrics.evictions = stats.evictions;
    metrics.wall_seconds = wall;
    metrics.events_per_second =
        wall > 0.0 ? static_cast<double>(metrics.events_total) / wall : 0.0;
}

}  // namespace

RunMetrics run_stream(std::istream& events, std::ostream& alerts,
                      const std::vector<RuleDefinition>* ruleset,
                      const ClassifierBundle* bundle, const PipelineConfig& config,
                      std::ostream* metrics_every, std::uint64_t metrics_interval) {
    DetectionPipeline pipeline(ruleset, bundle, config);
    EventReader reader(events, config.strict);
    RunMetrics metrics;
    const auto start = std::chrono::steady_clock::now();
    const std::size_t workers = std::max<std::size_t>(config.workers, 1);

    auto maybe_snapshot = [&] {
        if (!metrics_every || metrics_interval == 0) return;
        if (metrics.events_total % metrics_interval != 0) return;
        RunMetrics snapshot = metrics;
        finish_metrics(snapshot, pipeline.cache_stats(), seconds_since(start));
        *metrics_every << serialize_metrics(snapshot) << '\n';
    };

    if (workers == 1) {
        while (auto event = reader.next()) {
            ++metrics.events_total;
            if (auto alert = pipeline.process(*event)) {
                tally_alert(metrics, *alert);
                alerts << serialize_alert(*alert) << '\n';
            }
            maybe_snapshot();
        }
    } else {
        // Chunked parallel map; alert emission keeps input order.
        const std::size_t chunk_size = std::max<std::size_t>(256 * workers, 1024);
        std::vector<SiemEvent> chunk;
        chunk.reserve(chunk_size);
        bool done = false;
        while (!done) {
            chunk.clear();
            while (chunk.size() < chunk_size) {
                auto event = reader.next();
                if (!event) {
                    done = true;
                    break;
                }
                chunk.push_back(std::move(*event));
            }
            if (chunk.empty()) break;
            std::vector<std::optional<Alert>> results(chunk.size());
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (std::size_t w = 0; w < workers; ++w) {
                pool.emplace_back([&, w] {
                    for (std::size_t i = w; i < chunk.size(); i += workers)
                        results[i] = pipeline.process(chunk[i]);
                });
            }
            for (std::thread& thread : pool) thread.join();
            for (std::size_t i = 0; i < chunk.size(); ++i) {
                ++metrics.events_total;
                if (results[i]) {
                    tally_alert(metrics, *results[i]);
                    alerts << serialize_alert(*results[i]) << '\n';
                }
                maybe_snapshot();
            }
        }
    }

    metrics.malformed_lines = reader.malformed_lines();
    finish_metrics(metrics, pipeline.cache_stats(), seconds_since(start));
    if (metrics_every)
        *metrics_every << serialize_metrics(metrics) << '\n';
    return metrics;
}

RunMetrics replay_events(std::span<const SiemEvent> events, DetectionPipeline& pipeline,
                         std::vector<Alert>* alerts_out) {
    RunMetrics metrics;
    const auto start = std::chrono::steady_clock::now();
    const std::size_t workers = std::max<std::size_t>(pipeline.config().workers, 1);
    if (workers == 1 || alerts_out) {
        for (const SiemEvent& event : events) {
            ++metrics.events_total;
            if (auto alert = pipeline.process(event)) {
                tally_alert(metrics, *alert);
                if (alerts_out) alerts_out->push_back(std::move(*alert));
            }
        }
    } else {
        std::vector<std::thread> pool;
        std::vector<RunMetrics> partial(workers);
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < events.size(); i += workers) {
                    ++partial[w].events_total;
                    if (auto alert = pipeline.process(events[i]))
                        tally_alert(partial[w], *alert);
                }
            });
        }
        for (std::thread& thread : pool) thread.join();
        for (const RunMetrics& part : partial) {
            metrics.events_total += part.events_total;
            metrics.alerts_total += part.alerts_total;
            metrics.rule_match_alerts += part.rule_match_alerts;
            metrics.evasion_alerts += part.evasion_alerts;
        }
    }
    finish_metrics(metrics, pipeline.cache_stats(), seconds_since(start));
    return metrics;
}

}  // namespace amides
