#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "amides/attribution.hpp"
#include "amides/classifier.hpp"
#include "support/helpers.hpp"

using namespace amides;

namespace {

// A miniature but fully populated bundle: two benign documents against two
// rule-term documents, with attribution models for both rules.
ClassifierBundle tiny_bundle(bool with_attribution = false) {
    const std::vector<TokenSequence> benign_docs{
        pipeline_tokens("svchost.exe -k netsvcs"),
        pipeline_tokens("explorer.exe shell startup"),
        pipeline_tokens("winword.exe report.docx"),
    };
    const std::vector<RuleTermSet> term_sets{
        {"rule-curl", {" -urlcache ", "curl -o"}},
        {"rule-task", {" /create "}},
    };

    std::vector<TokenSequence> corpus = benign_docs;
    std::vector<TokenSequence> term_docs;
    for (const auto& set : term_sets)
        for (const auto& term : set.terms) {
            term_docs.push_back(pipeline_tokens(term));
            corpus.push_back(term_docs.back());
        }

    ClassifierBundle bundle;
    bundle.idf = fit_idf(corpus);

    TrainingSet training;
    std::vector<double> benign_scores, malicious_scores;
    for (const auto& doc : benign_docs) {
        training.vectors.push_back(vectorize(doc, bundle.idf));
        training.labels.push_back(Label::benign);
    }
    for (const auto& doc : term_docs) {
        training.vectors.push_back(vectorize(doc, bundle.idf));
        training.labels.push_back(Label::malicious);
    }
    bundle.model = train_linear_svm(training, {1.0, false, 1e-8, 50000, 7});
    for (std::size_t i = 0; i < training.size(); ++i) {
        const double score = decision_value(bundle.model, training.vectors[i]);
        (training.labels[i] == Label::benign ? benign_scores : malicious_scores)
            .push_back(score);
    }
    bundle.calibration = calibrate(benign_scores, malicious_scores, 0.0, 1.0);
    bundle.selector = default_selector(EventType::process_creation);
    bundle.meta.created_at = "2022-05-02T00:00:00Z";
    bundle.meta.ruleset_fingerprint = "0123456789abcdef";
    if (with_attribution) {
        std::vector<SparseFeatureVector> benign_vectors;
        for (const auto& doc : benign_docs)
            benign_vectors.push_back(vectorize(doc, bundle.idf));
        bundle.attribution =
            train_attribution(term_sets, bundle.idf, benign_vectors, 1.0, false);
    }
    return bundle;
}

}  // namespace

TEST_CASE("calibrate with a zero budget puts the default just above the benign max") {
    Calibration cal = calibrate({-0.7, -0.2, -0.9}, {}, 0.0, 5.0, 1e-6);
    CHECK(cal.raw_default == doctest::Approx(-0.2 + 1e-6).epsilon(1e-15));
    CHECK(cal.fallback_range);  // no malicious scores, no MCC band
    CHECK(cal.raw_lo == doctest::Approx(cal.raw_default - 1.0));
    CHECK(cal.raw_hi == doctest::Approx(cal.raw_default + 1.0));
    CHECK(cal.n_per_day == 0.0);
    CHECK(cal.days == 5.0);
}

TEST_CASE("calibrate admits exactly the budgeted number of false alerts") {
    // Distinct scores: with budget floor(3*1)=3 the default sits on the 4th
    // highest score, so exactly 3 scores lie strictly above it.
    const std::vector<double> benign{0.9, 0.1, 0.7, -0.3, 0.5, -0.1, 0.3};
    Calibration cal = calibrate(benign, {}, 3.0, 1.0, 1e-6);
    CHECK(cal.raw_default == doctest::Approx(0.3).epsilon(1e-12));
    std::size_t above = 0;
    for (double s : benign)
        if (s > cal.raw_default) ++above;
    CHECK(above == 3);

    // A budget at least as large as the corpus floors the threshold below
    // every score.
    Calibration all = calibrate(benign, {}, 10.0, 1.0, 1e-6);
    CHECK(all.raw_default == doctest::Approx(-0.3 - 1e-6).epsilon(1e-12));
    above = 0;
    for (double s : benign)
        if (s > all.raw_default) ++above;
    CHECK(above == benign.size());

    // Fractional products floor: 2.5 alerts/day * 1 day -> budget 2.
    Calibration fractional = calibrate(benign, {}, 2.5, 1.0, 1e-6);
    CHECK(fractional.raw_default == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("calibrate brackets the informative band with the MCC sweep") {
    // Separated classes: the midpoints are -1.75, -0.25, 1.5 and all reach
    // MCC >= 0.1, so the band spans the full run.
    Calibration cal = calibrate({-2.0, -1.5}, {1.0, 2.0}, 0.0, 1.0, 1e-6);
    CHECK_FALSE(cal.fallback_range);
    CHECK(cal.raw_default == doctest::Approx(-1.5 + 1e-6));
    CHECK(cal.raw_lo == doctest::Approx(-1.75).epsilon(1e-12));
    CHECK(cal.raw_hi == doctest::Approx(1.5).epsilon(1e-12));
    // The band always contains the default with an epsilon of slack.
    CHECK(cal.raw_lo <= cal.raw_default - cal.epsilon);
    CHECK(cal.raw_hi >= cal.raw_default + cal.epsilon);

    // Degenerate scores leave no midpoints; the range falls back to +-1.
    Calibration degenerate = calibrate({0.0, 0.0}, {0.0}, 0.0, 1.0, 1e-6);
    CHECK(degenerate.fallback_range);
    CHECK(degenerate.raw_lo == doctest::Approx(degenerate.raw_default - 1.0));
    CHECK(degenerate.raw_hi == doctest::Approx(degenerate.raw_default + 1.0));
}

TEST_CASE("calibrate validates its inputs") {
    CHECK_THROWS_AS(calibrate({}, {}, 0.0, 1.0, 1e-6), EmptyScoresError);
    CHECK_THROWS_AS(calibrate({0.0}, {}, -1.0, 1.0, 1e-6), OutOfRangeError);
    CHECK_THROWS_AS(calibrate({0.0}, {}, 0.0, 0.0, 1e-6), OutOfRangeError);
    CHECK_THROWS_AS(calibrate({0.0}, {}, 0.0, 1.0, 0.0), OutOfRangeError);
}

TEST_CASE("the unit threshold map is anchored, monotone, and invertible") {
    Calibration cal;
    cal.raw_default = -0.05;
    cal.raw_lo = -0.75;
    cal.raw_hi = 0.45;

    CHECK(unit_to_raw(cal, 0.5) == cal.raw_default);  // exact anchor
    CHECK(unit_to_raw(cal, 0.0) == cal.raw_lo);
    CHECK(unit_to_raw(cal, 1.0) == cal.raw_hi);
    CHECK(unit_to_raw(cal, 0.25) ==
          doctest::Approx((cal.raw_lo + cal.raw_default) / 2.0).epsilon(1e-12));
    CHECK(unit_to_raw(cal, 0.75) ==
          doctest::Approx((cal.raw_default + cal.raw_hi) / 2.0).epsilon(1e-12));

    double previous = cal.raw_lo - 1.0;
    for (int i = 0; i <= 100; ++i) {
        const double unit = static_cast<double>(i) / 100.0;
        const double raw = unit_to_raw(cal, unit);
        CHECK(raw > previous);
        previous = raw;
        CHECK(raw_to_unit(cal, raw) == doctest::Approx(unit).epsilon(1e-12));
    }

    CHECK_THROWS_AS(unit_to_raw(cal, -0.1), OutOfRangeError);
    CHECK_THROWS_AS(unit_to_raw(cal, 1.1), OutOfRangeError);
}

TEST_CASE("classify scores the empty text as the bias and flags by strict >") {
    ClassifierBundle bundle = tiny_bundle();
    Classification empty = classify(bundle, "");
    CHECK(empty.raw_score == bundle.model.bias);
    CHECK(empty.key == "");

    // Threshold semantics: monotone one-way flips across rising thresholds.
    const std::string evasive = "curl -o http://payload";
    bool last = true;
    for (double unit : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const bool now = classify(bundle, evasive, unit).evasion;
        if (!last) CHECK_FALSE(now);
        last = now;
    }
    CHECK(classify(bundle, evasive, 0.0).evasion);  // everything above raw_lo flags
}

TEST_CASE("classify consults and fills the cache transparently") {
    ClassifierBundle bundle = tiny_bundle();
    ResultCache cache(64);

    Classification first = classify(bundle, "curl -o http://x", 0.5, &cache);
    CHECK_FALSE(first.cached);
    Classification second = classify(bundle, "curl -o http://x", 0.5, &cache);
    CHECK(second.cached);
    CHECK(second.raw_score == first.raw_score);
    CHECK(second.key == first.key);
    CHECK(cache.stats().hits == 1);
    CHECK(cache.stats().misses == 1);

    // Quoting-insertion variants share the canonical key, so they hit too.
    Classification variant = classify(bundle, "curl -\"o\" http://x", 0.5, &cache);
    CHECK(variant.cached);
    CHECK(variant.raw_score == first.raw_score);

    // A different threshold re-uses the cached score without a new miss.
    const CacheStats before = cache.stats();
    Classification rethresholded = classify(bundle, "curl -o http://x", 1.0, &cache);
    CHECK(rethresholded.cached);
    CHECK(cache.stats().misses == before.misses);

    // Decisions with and without the cache agree everywhere.
    std::mt19937_64 rng(3);
    for (int i = 0; i < 50; ++i) {
        const std::string text =
            testsupport::random_word(rng, 2, 8) + " " + testsupport::random_word(rng, 2, 8);
        for (double unit : {0.25, 0.5, 0.75}) {
            Classification cached = classify(bundle, text, unit, &cache);
            Classification direct = classify(bundle, text, unit, nullptr);
            CHECK(cached.evasion == direct.evasion);
            CHECK(cached.raw_score == direct.raw_score);
        }
    }
}

TEST_CASE("ResultCache evicts least-recently-used entries at capacity") {
    ResultCache cache(2);
    cache.put("a", {1.0, std::nullopt});
    cache.put("b", {2.0, std::nullopt});
    cache.put("c", {3.0, std::nullopt});  // evicts a
    CHECK(cache.size() == 2);
    CHECK(cache.stats().evictions == 1);
    CHECK_FALSE(cache.get("a").has_value());
    CHECK(cache.get("c").has_value());
    CHECK(cache.get("b").has_value());  // b is now the most recent entry

    // get() refreshed b above c, so inserting d evicts c, not b.
    cache.put("d", {4.0, std::nullopt});
    CHECK(cache.get("b").has_value());
    CHECK_FALSE(cache.get("c").has_value());
    CHECK(cache.get("d").has_value());

    CacheStats stats = cache.stats();
    CHECK(stats.hits == 4);       // c, b, b, d
    CHECK(stats.misses == 2);     // a, c
    CHECK(stats.evictions == 2);  // a, then c
}

TEST_CASE("ResultCache edge behaviour") {
    SUBCASE("zero capacity never stores") {
        ResultCache off(0);
        off.put("a", {1.0, std::nullopt});
        CHECK(off.size() == 0);
        CHECK_FALSE(off.get("a").has_value());
    }

    SUBCASE("put on an existing key updates in place without eviction") {
        ResultCache cache(2);
        cache.put("a", {1.0, std::nullopt});
        cache.put("a", {9.0, std::nullopt});
        CHECK(cache.size() == 1);
        CHECK(cache.get("a")->raw_score == 9.0);
        CHECK(cache.stats().evictions == 0);
    }

    SUBCASE("store_attribution attaches only to resident keys") {
        ResultCache cache(2);
        AttributionList list;
        list.ranked.push_back({"rule-x", "", 0.5});
        cache.store_attribution("missing", list);  // no-op
        cache.put("a", {1.0, std::nullopt});
        cache.store_attribution("a", list);
        auto entry = cache.get("a");
        REQUIRE(entry.has_value());
        REQUIRE(entry->attribution.has_value());
        CHECK(entry->attribution->ranked[0].rule_id == "rule-x");
    }

    SUBCASE("sharded caches keep working and aggregate stats") {
        // 40 entries per shard: no shard can overflow even under hash skew.
        ResultCache cache(160, 4);
        for (int i = 0; i < 40; ++i)
            cache.put("key-" + std::to_string(i), {static_cast<double>(i), std::nullopt});
        std::size_t found = 0;
        for (int i = 0; i < 40; ++i)
            if (cache.get("key-" + std::to_string(i))) ++found;
        CHECK(found == 40);
        CHECK(cache.stats().hits == 40);
        CHECK(cache.size() == 40);
    }
}

TEST_CASE("bundle serialization round-trips every field") {
    ClassifierBundle bundle = tiny_bundle(/*with_attribution=*/true);
    std::stringstream stream;
    save_bundle(bundle, stream);
    ClassifierBundle loaded = load_bundle(stream);

    CHECK(loaded.meta.format_version == bundle.meta.format_version);
    CHECK(loaded.meta.created_at == bundle.meta.created_at);
    CHECK(loaded.meta.ruleset_fingerprint == bundle.meta.ruleset_fingerprint);
    CHECK(loaded.selector.event_type == bundle.selector.event_type);
    CHECK(loaded.selector.event_fields == bundle.selector.event_fields);
    CHECK(loaded.selector.rule_fields == bundle.selector.rule_fields);
    CHECK(loaded.idf.terms == bundle.idf.terms);
    CHECK(loaded.idf.idf == bundle.idf.idf);  // exact doubles
    CHECK(loaded.idf.corpus_size == bundle.idf.corpus_size);
    CHECK(loaded.idf.vocabulary == bundle.idf.vocabulary);
    CHECK(loaded.model.weights == bundle.model.weights);
    CHECK(loaded.model.bias == bundle.model.bias);
    CHECK(loaded.model.c == bundle.model.c);
    CHECK(loaded.model.meta.seed == bundle.model.meta.seed);
    CHECK(loaded.model.meta.converged == bundle.model.meta.converged);
    CHECK(loaded.calibration.raw_default == bundle.calibration.raw_default);
    CHECK(loaded.calibration.raw_lo == bundle.calibration.raw_lo);
    CHECK(loaded.calibration.raw_hi == bundle.calibration.raw_hi);
    CHECK(loaded.calibration.fallback_range == bundle.calibration.fallback_range);
    REQUIRE(loaded.attribution.has_value());
    REQUIRE(loaded.attribution->per_rule.size() == bundle.attribution->per_rule.size());
    for (std::size_t i = 0; i < loaded.attribution->per_rule.size(); ++i) {
        CHECK(loaded.attribution->per_rule[i].first ==
              bundle.attribution->per_rule[i].first);
        CHECK(loaded.attribution->per_rule[i].second.weights ==
              bundle.attribution->per_rule[i].second.weights);
    }

    // Classifications through the reloaded bundle are bit-identical.
    for (const char* text : {"curl -o http://x", "svchost.exe -k netsvcs", ""})
        CHECK(classify(loaded, text).raw_score == classify(bundle, text).raw_score);

    // A bundle without attribution stays without it.
    ClassifierBundle plain = tiny_bundle(false);
    std::stringstream plain_stream;
    save_bundle(plain, plain_stream);
    CHECK_FALSE(load_bundle(plain_stream).attribution.has_value());
}

TEST_CASE("bundle loading rejects corruption and version drift") {
    ClassifierBundle bundle = tiny_bundle();
    std::stringstream stream;
    save_bundle(bundle, stream);
    const std::string serialized = stream.str();

    SUBCASE("truncation") {
        std::istringstream truncated(serialized.substr(0, serialized.size() / 2));
        CHECK_THROWS_AS(load_bundle(truncated), CorruptBundleError);
    }

    SUBCASE("payload bit-flip breaks the checksum") {
        std::string tampered = serialized;
        const std::size_t at = tampered.find("raw_default");
        REQUIRE(at != std::string::npos);
        tampered[at] = 'R';
        std::istringstream in(tampered);
        CHECK_THROWS_AS(load_bundle(in), CorruptBundleError);
    }

    SUBCASE("not a bundle at all") {
        std::istringstream junk("{\"hello\":1}");
        CHECK_THROWS_AS(load_bundle(junk), CorruptBundleError);
        std::istringstream empty("");
        CHECK_THROWS_AS(load_bundle(empty), CorruptBundleError);
    }

    SUBCASE("a future format version is refused") {
        ClassifierBundle future = tiny_bundle();
        future.meta.format_version = kBundleFormatVersion + 1;
        std::stringstream future_stream;
        save_bundle(future, future_stream);
        CHECK_THROWS_AS(load_bundle(future_stream), VersionMismatchError);
    }

    SUBCASE("file variants share the behaviour") {
        testsupport::TempDir dir;
        save_bundle_file(bundle, dir.file("model.amides"));
        ClassifierBundle loaded = load_bundle_file(dir.file("model.amides"));
        CHECK(loaded.model.weights == bundle.model.weights);
        CHECK_THROWS_AS(load_bundle_file(dir.file("absent.amides")), Error);
    }
}
