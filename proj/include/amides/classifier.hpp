#pragma once

#include <cstdint>
#include <iosfwd>
#include <list>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "amides/attribution.hpp"
#include "amides/learner.hpp"

namespace amides {

struct EmptyScoresError : Error {
    using Error::Error;
};
struct OutOfRangeError : Error {
    using Error::Error;
};
struct VersionMismatchError : Error {
    using Error::Error;
};
struct CorruptBundleError : Error {
    using Error::Error;
};

struct Calibration {
    double raw_default = 0.0;  // unit threshold 0.5
    double raw_lo = -1.0;      // unit threshold 0.0
    double raw_hi = 1.0;       // unit threshold 1.0
    double n_per_day = 0.0;
    double days = 1.0;
    double epsilon = 1e-6;
    bool fallback_range = false;  // no raw score band reached the MCC floor
};

// Default threshold admits at most floor(n_per_day * days) benign training
// scores above it; the [lo, hi] band is the widest contiguous raw interval
// keeping MCC >= 0.1 on the training scores, widened to contain the default.
Calibration calibrate(const std::vector<double>& benign_scores,
                      const std::vector<double>& malicious_scores,
                      double n_per_day, double days, double epsilon = 1e-6);

// Piecewise linear: [0, 0.5] -> [raw_lo, raw_default], [0.5, 1] -> [raw_default,
// raw_hi]. Inputs outside [0, 1] throw OutOfRangeError.
double unit_to_raw(const Calibration& calibration, double unit);
// Inverse of unit_to_raw on [raw_lo, raw_hi]; extrapolates linearly outside.
double raw_to_unit(const Calibration& calibration, double raw);

struct CacheStats {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t evictions = 0;
};

struct CacheEntry {
    double raw_score = 0.0;
    std::optional<AttributionList> attribution;
};

// LRU over canonical feature keys. Stores raw scores so threshold changes
// never invalidate entries; attribution is filled in lazily.
class ResultCache {
  public:
    explicit ResultCache(std::size_t capacity, std::size_t shards = 1);

    std::optional<CacheEntry> get(const std::string& key);
    void put(const std::string& key, CacheEntry entry);
    // No-op when the key was evicted in the meantime.
    void store_attribution(const std::string& key, const AttributionList& list);

    CacheStats stats() const;
    std::size_t size() const;
    std::size_t capacity() const { return capacity_; }

  private:
    struct Shard {
        mutable std::mutex mutex;
        std::list<std::pair<std::string, CacheEntry>> order;  // front = most recent
        std::unordered_map<std::string,
                           std::list<std::pair<std::string, CacheEntry>>::iterator>
            index;
        CacheStats stats;
    };

    Shard& shard_for(const std::string& key);

    std::size_t capacity_ = 0;
    std::size_t per_shard_capacity_ = 0;
    std::vector<Shard> shards_;
};

struct BundleMeta {
    std::uint32_t format_version = 1;
    std::string created_at;  // empty unless explicitly set
    std::string ruleset_fingerprint;
};

struct ClassifierBundle {
    IdfModel idf;
    LinearModel model;
    Calibration calibration;
    FieldSelector selector;  // the event type this bundle classifies
    std::optional<AttributionModel> attribution;
    BundleMeta meta;
};

struct Classification {
    bool evasion = false;
    double raw_score = 0.0;
    bool cached = false;
    std::string key;
};

// Feature-extracts, scores (through the cache when given) and thresholds.
Classification classify(const ClassifierBundle& bundle, std::string_view text,
                        double unit_threshold = 0.5, ResultCache* cache = nullptr);

constexpr std::uint32_t kBundleFormatVersion = 1;

void save_bundle(const ClassifierBundle& bundle, std::ostream& out);
void save_bundle_file(const ClassifierBundle& bundle, const std::string& path);
ClassifierBundle load_bundle(std::istream& in);
ClassifierBundle load_bundle_file(const std::string& path);

}  // namespace amides
