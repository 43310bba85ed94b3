#include <doctest.h>

#include <map>
#include <sstream>

#include <json.hpp>

#include "amides/harness.hpp"
#include "amides/util.hpp"
#include "support/helpers.hpp"

using namespace amides;
using testsupport::TempDir;
using testsupport::write_file;

namespace {

const std::vector<RuleDefinition>& harness_rules() {
    static const std::vector<RuleDefinition> rules = [] {
        std::vector<RuleDefinition> out;
        out.push_back(
            testsupport::contains_rule("r-urlcache", {"-urlcache -split -f"}));
        out.push_back(testsupport::contains_rule("r-task", {" /create "}));
        out.push_back(testsupport::contains_rule("r-reg", {" /v disableav "}));
        return out;
    }();
    return rules;
}

const std::vector<std::string>& benign_texts() {
    static const std::vector<std::string> texts{
        "svchost.exe -k netsvcs",    "explorer.exe",
        "winword.exe report.docx",   "chrome.exe --type=renderer",
        "outlook.exe /recycle",      "teams.exe --process-start",
        "conhost.exe 0x4",           "spoolsv.exe",
        "searchindexer.exe /embed",  "taskhostw.exe keyroam",
    };
    return texts;
}

std::vector<SiemEvent> benign_events() {
    std::vector<SiemEvent> events;
    int i = 0;
    for (const std::string& text : benign_texts())
        events.push_back(
            testsupport::make_process_event("vb" + std::to_string(i++), text));
    return events;
}

// Variants that evade their rule's literal pattern but keep its tokens, mixed
// with a couple of in-vocabulary benign words so scores are distinct.
std::vector<SiemEvent> evasion_events() {
    return {
        testsupport::make_process_event("u0",
                                        "certutil.exe -urlcache\" -split -f http://a"),
        testsupport::make_process_event(
            "u1", "certutil.exe -urlcache\" -split -f report"),
        testsupport::make_process_event(
            "u2", "certutil.exe -urlcache\" -split -f recycle"),
        testsupport::make_process_event(
            "u3", "certutil.exe -urlcache\" -split -f report recycle"),
        testsupport::make_process_event("t0", "schtasks.exe /create\" /tn job"),
        testsupport::make_process_event("t1", "schtasks.exe /create\" /tn report"),
        testsupport::make_process_event("t2", "schtasks.exe /create\" /tn recycle"),
    };
}

std::map<std::string, std::string> evasion_truth() {
    return {{"u0", "r-urlcache"}, {"u1", "r-urlcache"}, {"u2", "r-urlcache"},
            {"u3", "r-urlcache"}, {"t0", "r-task"},     {"t1", "r-task"},
            {"t2", "r-task"}};
}

const ClassifierBundle& harness_bundle() {
    static const ClassifierBundle bundle = [] {
        std::vector<RuleTermSet> term_sets;
        for (const RuleDefinition& rule : harness_rules())
            term_sets.push_back(
                extract_rule_terms(rule, default_selector(EventType::process_creation)));

        std::vector<TokenSequence> benign_docs;
        for (const std::string& text : benign_texts())
            benign_docs.push_back(pipeline_tokens(text));
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
        for (const auto& doc : benign_docs) {
            training.vectors.push_back(vectorize(doc, bundle.idf));
            training.labels.push_back(Label::benign);
        }
        for (const auto& doc : term_docs) {
            training.vectors.push_back(vectorize(doc, bundle.idf));
            training.labels.push_back(Label::malicious);
        }
        bundle.model = train_linear_svm(training, {1.0, false, 1e-8, 50000, 7});
        std::vector<double> benign_scores, malicious_scores;
        for (std::size_t i = 0; i < training.size(); ++i) {
            const double score = decision_value(bundle.model, training.vectors[i]);
            (training.labels[i] == Label::benign ? benign_scores : malicious_scores)
                .push_back(score);
        }
        bundle.calibration = calibrate(benign_scores, malicious_scores, 0.0, 1.0);
        bundle.selector = default_selector(EventType::process_creation);
        std::vector<SparseFeatureVector> benign_vectors;
        for (const auto& doc : benign_docs)
            benign_vectors.push_back(vectorize(doc, bundle.idf));
        bundle.attribution =
            train_attribution(term_sets, bundle.idf, benign_vectors, 1.0, false);
        return bundle;
    }();
    return bundle;
}

TrainerOptions tiny_trainer_options() {
    TrainerOptions options;
    options.seed = 42;
    options.folds = 2;
    options.grid.c_values = {1.0};
    options.grid.balanced_options = {false};
    return options;
}

double score_of(const ClassifierBundle& bundle, const SiemEvent& event) {
    const std::string text = extract_text(event, bundle.selector);
    return decision_value(bundle.model, vectorize(pipeline_tokens(text), bundle.idf));
}

}  // namespace

TEST_CASE("load_labels parses the sidecar and rejects bad lines") {
    TempDir dir;
    const std::string path = dir.file("labels.jsonl");

    write_file(path,
               "{\"id\":\"a\",\"label\":\"benign\"}\n"
               "\n"
               "{\"id\":\"b\",\"label\":\"match\",\"rule_id\":\"r1\"}\n"
               "{\"id\":\"c\",\"label\":\"evasion\",\"rule_id\":\"r2\"}\n");
    auto labels = load_labels(path);
    REQUIRE(labels.size() == 3);
    CHECK(labels.at("a").label == "benign");
    CHECK(labels.at("a").rule_id.empty());
    CHECK(labels.at("b").rule_id == "r1");
    CHECK(labels.at("c").label == "evasion");

    CHECK_THROWS_AS(load_labels(dir.file("absent.jsonl")), Error);

    write_file(path, "{broken\n");
    CHECK_THROWS_AS(load_labels(path), MalformedLineError);
    write_file(path, "{\"id\":7,\"label\":\"benign\"}\n");
    CHECK_THROWS_AS(load_labels(path), MalformedLineError);
    write_file(path, "{\"id\":\"a\",\"label\":\"suspicious\"}\n");
    CHECK_THROWS_AS(load_labels(path), MalformedLineError);
    write_file(path, "{\"id\":\"a\",\"label\":\"match\",\"rule_id\":3}\n");
    CHECK_THROWS_AS(load_labels(path), MalformedLineError);
    write_file(path,
               "{\"id\":\"a\",\"label\":\"benign\"}\n"
               "{\"id\":\"a\",\"label\":\"match\"}\n");
    CHECK_THROWS_AS(load_labels(path), Error);
}

TEST_CASE("split_by_label buckets events and tracks ground-truth rules") {
    std::map<std::string, EventLabel> labels{
        {"a", {"benign", ""}},
        {"b", {"match", "r1"}},
        {"c", {"evasion", "r2"}},
        {"d", {"evasion", ""}},
    };
    std::vector<SiemEvent> events{
        testsupport::make_process_event("a", "x"),
        testsupport::make_process_event("b", "y"),
        testsupport::make_process_event("c", "z"),
        testsupport::make_process_event("d", "w"),
    };
    LabeledEvents split = split_by_label(events, labels);
    REQUIRE(split.benign.size() == 1);
    REQUIRE(split.matches.size() == 1);
    REQUIRE(split.evasions.size() == 2);
    CHECK(split.benign[0].id == "a");
    CHECK(split.match_rule.at("b") == "r1");
    CHECK(split.evasion_rule.at("c") == "r2");
    CHECK_FALSE(split.evasion_rule.count("d"));  // no rule id given

    events.push_back(testsupport::make_process_event("e", "v"));
    CHECK_THROWS_AS(split_by_label(events, labels), Error);
}

TEST_CASE("split_by_time cuts at the midpoint of the observed span") {
    auto at = [](std::string id, std::string ts) {
        return testsupport::make_process_event(std::move(id), "cmd", std::move(ts));
    };
    std::vector<SiemEvent> events{
        at("e0", "2024-01-01T00:00:00Z"),
        at("e1", "2024-01-01T12:00:00Z"),
        at("e2", "2024-01-02T00:00:00Z"),  // exactly the midpoint
        at("e3", "2024-01-03T00:00:00Z"),
        testsupport::make_process_event("e4", "cmd"),           // no timestamp
        at("e5", "not-a-timestamp"),
    };
    std::vector<SiemEvent> earlier, later;
    split_by_time(events, earlier, later);

    auto ids = [](const std::vector<SiemEvent>& list) {
        std::vector<std::string> out;
        for (const auto& event : list) out.push_back(event.id);
        return out;
    };
    CHECK(ids(earlier) == std::vector<std::string>{"e0", "e1", "e4", "e5"});
    CHECK(ids(later) == std::vector<std::string>{"e2", "e3"});

    std::vector<SiemEvent> no_time{testsupport::make_process_event("x", "cmd")};
    std::vector<SiemEvent> a, b;
    CHECK_THROWS_AS(split_by_time(no_time, a, b), Error);
}

TEST_CASE("sweep_thresholds walks the unit grid with benign breakpoints") {
    const ClassifierBundle& bundle = harness_bundle();
    const auto benign = benign_events();
    const auto evasions = evasion_events();

    SweepReport report = sweep_thresholds(bundle, benign, evasions, 11, true);

    SUBCASE("rows are unique, sorted, and contain the uniform grid") {
        REQUIRE(report.rows.size() >= 11);
        for (std::size_t i = 1; i < report.rows.size(); ++i) {
            CHECK(report.rows[i - 1].unit_threshold < report.rows[i].unit_threshold);
            CHECK(report.rows[i - 1].raw_threshold < report.rows[i].raw_threshold);
        }
        CHECK(report.rows.front().unit_threshold == 0.0);
        CHECK(report.rows.back().unit_threshold == 1.0);
    }

    SUBCASE("every benign score inside the unit interval appears as a row") {
        for (const SiemEvent& event : benign) {
            const double u = raw_to_unit(bundle.calibration, score_of(bundle, event));
            if (u <= 0.0 || u >= 1.0) continue;
            bool present = false;
            for (const SweepRow& row : report.rows)
                present = present || row.unit_threshold == u;
            CAPTURE(u);
            CHECK(present);
        }
    }

    SUBCASE("rows reproduce compute_metrics on independently computed scores") {
        std::vector<double> scores;
        std::vector<Label> labels;
        for (const auto& event : benign) {
            scores.push_back(score_of(bundle, event));
            labels.push_back(Label::benign);
        }
        for (const auto& event : evasions) {
            scores.push_back(score_of(bundle, event));
            labels.push_back(Label::malicious);
        }
        for (const SweepRow& row : report.rows) {
            const Metrics expected =
                compute_metrics(scores, labels, row.raw_threshold);
            CHECK(row.metrics.tp == expected.tp);
            CHECK(row.metrics.fp == expected.fp);
            CHECK(row.metrics.tn == expected.tn);
            CHECK(row.metrics.fn == expected.fn);
            CHECK(row.metrics.precision == expected.precision);
            CHECK(row.metrics.recall == expected.recall);
            CHECK(row.metrics.f1 == expected.f1);
            CHECK(row.metrics.mcc == expected.mcc);
        }

        // Detection counts can only fall as the threshold rises.
        for (std::size_t i = 1; i < report.rows.size(); ++i) {
            CHECK(report.rows[i].metrics.tp <= report.rows[i - 1].metrics.tp);
            CHECK(report.rows[i].metrics.fp <= report.rows[i - 1].metrics.fp);
        }
    }

    SUBCASE("the dataset fingerprint hashes ids, classes, and scores") {
        std::string blob;
        auto add = [&](const SiemEvent& event, char cls) {
            blob += event.id;
            blob += '\x1F';
            blob += cls;
            blob += '\x1F';
            blob += format_double(score_of(bundle, event));
            blob += '\x1E';
        };
        for (const auto& event : benign) add(event, 'b');
        for (const auto& event : evasions) add(event, 'e');
        CHECK(report.dataset_fingerprint == fnv1a64(blob));
    }

    SUBCASE("the default threshold separates this corpus perfectly") {
        const SweepRow* at_default = nullptr;
        for (const SweepRow& row : report.rows)
            if (row.unit_threshold == 0.5) at_default = &row;
        REQUIRE(at_default != nullptr);
        CHECK(at_default->metrics.tp == evasions.size());
        CHECK(at_default->metrics.fp == 0);
        CHECK(at_default->metrics.precision == 1.0);
        CHECK(at_default->metrics.recall == 1.0);
    }

    SUBCASE("a sweep needs at least two grid points") {
        CHECK_THROWS_AS(sweep_thresholds(bundle, benign, evasions, 1, false),
                        BadRangeError);
        CHECK_THROWS_AS(sweep_thresholds(bundle, benign, evasions, 0, false),
                        BadRangeError);
    }

    SUBCASE("csv and json renderings cover every row") {
        std::ostringstream csv;
        write_sweep_csv(report, csv);
        std::istringstream lines(csv.str());
        std::string line;
        std::size_t count = 0;
        while (std::getline(lines, line)) ++count;
        CHECK(count == report.rows.size() + 1);  // header

        auto doc = nlohmann::json::parse(sweep_to_json(report));
        CHECK(doc.at("dataset_fingerprint") ==
              to_hex64(report.dataset_fingerprint));
        CHECK(doc.at("rows").size() == report.rows.size());
        CHECK(doc.at("rows")[0].at("unit_threshold") == 0.0);
    }
}

TEST_CASE("benchmark_mode refuses overlapping match and evasion ids") {
    std::vector<SiemEvent> matches{testsupport::make_process_event(
        "m0", "certutil.exe -urlcache -split -f http://x")};
    std::vector<SiemEvent> evasions{testsupport::make_process_event(
        "m0", "certutil.exe -urlcache\" -split -f http://x")};
    CHECK_THROWS_AS(
        benchmark_mode(harness_rules(), benign_events(), benign_events(), matches,
                       evasions, default_selector(EventType::process_creation),
                       tiny_trainer_options()),
        Error);
}

TEST_CASE("benchmark_mode trains on matching events and sweeps the validation") {
    std::vector<SiemEvent> matches{
        testsupport::make_process_event("m0",
                                        "certutil.exe -urlcache -split -f http://x"),
        testsupport::make_process_event("m1", "schtasks.exe /create /tn job"),
    };
    SweepReport report = benchmark_mode(
        harness_rules(), benign_events(), benign_events(), matches, evasion_events(),
        default_selector(EventType::process_creation), tiny_trainer_options());
    CHECK(report.rows.size() >= 101);
    CHECK(report.dataset_fingerprint != 0);
    CHECK(report.rows.front().unit_threshold == 0.0);
    CHECK(report.rows.back().unit_threshold == 1.0);
}

TEST_CASE("taint_experiment validates its arguments") {
    const auto selector = default_selector(EventType::process_creation);
    CHECK_THROWS_AS(
        taint_experiment(harness_rules(), benign_events(), benign_events(),
                         evasion_events(), selector, tiny_trainer_options(), {1.0}, 1,
                         9),
        BadRangeError);
    CHECK_THROWS_AS(
        taint_experiment(harness_rules(), benign_events(), benign_events(),
                         evasion_events(), selector, tiny_trainer_options(), {-0.1},
                         1, 9),
        BadRangeError);
    CHECK_THROWS_AS(
        taint_experiment(harness_rules(), benign_events(), benign_events(),
                         evasion_events(), selector, tiny_trainer_options(), {0.0}, 0,
                         9),
        BadRangeError);
}

TEST_CASE("taint_experiment injects evasions into training and averages runs") {
    const auto selector = default_selector(EventType::process_creation);
    const auto benign = benign_events();
    const auto evasions = evasion_events();
    const TrainerOptions options = tiny_trainer_options();

    TaintReport report = taint_experiment(harness_rules(), benign, benign, evasions,
                                          selector, options, {0.0, 0.4}, 2, 9);

    REQUIRE(report.runs.size() == 4);
    CHECK(report.fractions == std::vector<double>{0.0, 0.4});
    CHECK(report.runs_per_fraction == 2);
    REQUIRE(report.mean_by_fraction.size() == 2);

    SUBCASE("run layout is fraction-major with the requested taint counts") {
        CHECK(report.runs[0].fraction == 0.0);
        CHECK(report.runs[0].run == 0);
        CHECK(report.runs[1].run == 1);
        CHECK(report.runs[2].fraction == 0.4);
        CHECK(report.runs[0].tainted == 0);
        CHECK(report.runs[1].tainted == 0);
        // 0.4 * 7 + 0.5 rounds to 3 tainted evasions.
        CHECK(report.runs[2].tainted == 3);
        CHECK(report.runs[3].tainted == 3);
    }

    SUBCASE("fraction zero reproduces a clean training run exactly") {
        TrainerResult clean = train_bundle(harness_rules(), benign, selector, options);
        SweepReport direct =
            sweep_thresholds(clean.bundle, benign, evasions, 101, false);
        CHECK(sweep_to_json(report.runs[0].sweep) == sweep_to_json(direct));
        CHECK(sweep_to_json(report.runs[1].sweep) == sweep_to_json(direct));
    }

    SUBCASE("tainted evasions leave the validation split") {
        const SweepRow& lowest = report.runs[2].sweep.rows.front();
        // Everything kept for validation sits above the lowest threshold here.
        CHECK(lowest.metrics.tp + lowest.metrics.fn == evasions.size() - 3);
        CHECK(report.runs[2].sweep.dataset_fingerprint !=
              report.runs[0].sweep.dataset_fingerprint);
    }

    SUBCASE("mean rows accumulate counts and average the rates") {
        const SweepReport& mean = report.mean_by_fraction[0];
        const SweepReport& run0 = report.runs[0].sweep;
        REQUIRE(mean.rows.size() == run0.rows.size());
        for (std::size_t t = 0; t < mean.rows.size(); ++t) {
            CHECK(mean.rows[t].metrics.tp == 2 * run0.rows[t].metrics.tp);
            CHECK(mean.rows[t].metrics.fp == 2 * run0.rows[t].metrics.fp);
            CHECK(mean.rows[t].metrics.precision ==
                  doctest::Approx(run0.rows[t].metrics.precision).epsilon(1e-12));
            CHECK(mean.rows[t].raw_threshold ==
                  doctest::Approx(run0.rows[t].raw_threshold).epsilon(1e-12));
        }
    }

    SUBCASE("the experiment is deterministic for a fixed seed") {
        TaintReport again =
            taint_experiment(harness_rules(), benign, benign, evasions, selector,
                             options, {0.0, 0.4}, 2, 9);
        CHECK(taint_to_json(report) == taint_to_json(again));
    }

    SUBCASE("csv rendering includes per-run and mean rows") {
        std::ostringstream csv;
        write_taint_csv(report, csv);
        std::istringstream lines(csv.str());
        std::string line;
        std::size_t count = 0;
        while (std::getline(lines, line)) ++count;
        std::size_t expected = 1;  // header
        for (const auto& run : report.runs) expected += run.sweep.rows.size();
        for (const auto& mean : report.mean_by_fraction) expected += mean.rows.size();
        CHECK(count == expected);
    }
}

TEST_CASE("attribution_ranks scores detected evasions against the ground truth") {
    const ClassifierBundle& bundle = harness_bundle();

    SUBCASE("a well-separated corpus attributes every evasion at rank one") {
        RankHistogram histogram =
            attribution_ranks(bundle, evasion_events(), evasion_truth());
        CHECK(histogram.detected == 7);
        CHECK(histogram.undetected == 0);
        CHECK(histogram.beyond == 0);
        REQUIRE(histogram.counts.size() == 10);
        CHECK(histogram.counts[0] == 7);
        CHECK(histogram.cumulative_fraction(1) == 1.0);
        CHECK(histogram.cumulative_fraction(10) == 1.0);
    }

    SUBCASE("events scoring below the threshold count as undetected") {
        auto evasions = evasion_events();
        evasions.push_back(testsupport::make_process_event("q0", "explorer.exe"));
        auto truth = evasion_truth();
        truth["q0"] = "r-task";
        RankHistogram histogram = attribution_ranks(bundle, evasions, truth);
        CHECK(histogram.detected == 7);
        CHECK(histogram.undetected == 1);
    }

    SUBCASE("a truth rule outside the top list counts as beyond") {
        std::vector<SiemEvent> one{evasion_events()[0]};  // urlcache tokens
        std::map<std::string, std::string> truth{{"u0", "r-task"}};
        RankHistogram wide = attribution_ranks(bundle, one, truth, 0.5, 10);
        CHECK(wide.detected == 1);
        CHECK(wide.beyond == 0);
        CHECK(wide.counts[0] == 0);  // r-task is ranked, but not first
        std::size_t total = 0;
        for (std::size_t count : wide.counts) total += count;
        CHECK(total == 1);

        RankHistogram narrow = attribution_ranks(bundle, one, truth, 0.5, 1);
        CHECK(narrow.counts.size() == 1);
        CHECK(narrow.beyond == 1);
    }

    SUBCASE("missing prerequisites raise errors") {
        ClassifierBundle no_attr = bundle;
        no_attr.attribution.reset();
        CHECK_THROWS_AS(
            attribution_ranks(no_attr, evasion_events(), evasion_truth()), Error);

        std::map<std::string, std::string> truth = evasion_truth();
        truth.erase("u0");
        CHECK_THROWS_AS(attribution_ranks(bundle, evasion_events(), truth), Error);
    }

    SUBCASE("histogram renderings agree with the counts") {
        RankHistogram histogram =
            attribution_ranks(bundle, evasion_events(), evasion_truth());
        std::ostringstream csv;
        write_ranks_csv(histogram, csv);
        std::istringstream lines(csv.str());
        std::string line;
        std::size_t count = 0;
        while (std::getline(lines, line)) ++count;
        CHECK(count == histogram.counts.size() + 2);  // header + beyond row

        auto doc = nlohmann::json::parse(ranks_to_json(histogram));
        CHECK(doc.at("detected") == 7);
        CHECK(doc.at("counts")[0] == 7);
        CHECK(doc.at("cumulative")[0] == 1.0);
    }

    SUBCASE("cumulative_fraction of an empty histogram is zero") {
        RankHistogram empty;
        empty.counts.assign(10, 0);
        CHECK(empty.cumulative_fraction(10) == 0.0);
    }
}

TEST_CASE("default_templates ship fifteen weighted process templates") {
    const auto templates = default_templates();
    REQUIRE(templates.size() == 15);
    for (const auto& tmpl : templates) {
        CHECK(tmpl.event_type == EventType::process_creation);
        CHECK(tmpl.field == "CommandLine");
        CHECK_FALSE(tmpl.image.empty());
        CHECK(tmpl.weight >= 1);
    }
    CHECK(templates[0].weight == 3);
}

TEST_CASE("the shipped template file mirrors the built-in set") {
    const auto from_file =
        load_templates(std::string(AMIDES_DATA_DIR) + "/templates/benign_process.yml");
    const auto builtin = default_templates();
    REQUIRE(from_file.size() == builtin.size());
    for (std::size_t i = 0; i < builtin.size(); ++i) {
        CAPTURE(i);
        CHECK(from_file[i].event_type == builtin[i].event_type);
        CHECK(from_file[i].field == builtin[i].field);
        CHECK(from_file[i].image == builtin[i].image);
        CHECK(from_file[i].text == builtin[i].text);
        CHECK(from_file[i].weight == builtin[i].weight);
    }
}

TEST_CASE("load_templates validates the document shape") {
    TempDir dir;
    const std::string path = dir.file("templates.yml");

    write_file(path, "- text: 'cmd {word}'\n  weight: 2\n");
    auto bare = load_templates(path);
    REQUIRE(bare.size() == 1);
    CHECK(bare[0].field == "CommandLine");  // default for process events
    CHECK(bare[0].weight == 2);

    write_file(path, "templates:\n  - text: 'x'\n    event_type: web_request\n");
    auto typed = load_templates(path);
    REQUIRE(typed.size() == 1);
    CHECK(typed[0].event_type == EventType::web_request);
    CHECK(typed[0].field == "url.full");

    CHECK_THROWS_AS(load_templates(dir.file("absent.yml")), Error);
    write_file(path, "- weight: 2\n");
    CHECK_THROWS_AS(load_templates(path), Error);
    write_file(path, "- text: 'x'\n  weight: 0\n");
    CHECK_THROWS_AS(load_templates(path), Error);
    write_file(path, "- text: 'x'\n  event_type: mainframe\n");
    CHECK_THROWS_AS(load_templates(path), Error);
    write_file(path, "just a scalar\n");
    CHECK_THROWS_AS(load_templates(path), Error);
    write_file(path, "templates: []\n");
    CHECK_THROWS_AS(load_templates(path), Error);
}

TEST_CASE("synth_benign renders a deterministic, evenly spaced corpus") {
    SynthOptions options;
    options.volume = 44;
    options.seed = 7;

    const auto templates = default_templates();
    const auto events = synth_benign(templates, options);
    REQUIRE(events.size() == 44);

    SUBCASE("ids and timestamps follow the ordinal") {
        CHECK(events[0].id == "synth-00000000");
        CHECK(events[43].id == "synth-00000043");
        REQUIRE(events[0].timestamp.has_value());
        CHECK(*events[0].timestamp == "2022-05-02T00:00:00Z");
        const std::int64_t start = *parse_iso8601(options.start_time);
        const auto span =
            static_cast<std::int64_t>(options.span_days * 86400.0);
        for (std::size_t i : {1u, 21u, 43u}) {
            const std::int64_t expected =
                start + static_cast<std::int64_t>(i) * span / 44;
            CHECK(*parse_iso8601(*events[i].timestamp) == expected);
        }
    }

    SUBCASE("the template mix is template-major by weight and repeats") {
        CHECK(events[0].fields.at("Image") == templates[0].image);
        CHECK(events[2].fields.at("Image") == templates[0].image);
        CHECK(events[3].fields.at("Image") == templates[1].image);
        CHECK(events[6].fields.at("Image") == templates[2].image);
        CHECK(events[21].fields.at("Image") == templates[14].image);
        CHECK(events[22].fields.at("Image") == templates[0].image);  // wraps
    }

    SUBCASE("equal options reproduce the corpus byte for byte") {
        const auto again = synth_benign(templates, options);
        REQUIRE(again.size() == events.size());
        for (std::size_t i = 0; i < events.size(); ++i)
            CHECK(serialize_event(again[i]) == serialize_event(events[i]));
    }

    SUBCASE("another seed keeps the mix and schedule, changing only draws") {
        SynthOptions other = options;
        other.seed = 8;
        const auto alt = synth_benign(templates, other);
        REQUIRE(alt.size() == events.size());
        bool any_text_differs = false;
        for (std::size_t i = 0; i < events.size(); ++i) {
            CHECK(alt[i].id == events[i].id);
            CHECK(alt[i].timestamp == events[i].timestamp);
            CHECK(alt[i].fields.at("Image") == events[i].fields.at("Image"));
            any_text_differs = any_text_differs ||
                               alt[i].fields.at("CommandLine") !=
                                   events[i].fields.at("CommandLine");
        }
        CHECK(any_text_differs);
    }

    SUBCASE("numeric and hex placeholders never reach the feature space") {
        // Mix position 15 is the taskhostw template, whose only placeholder is
        // {hex8}; whatever the seed draws, its tokens collapse to fixed words.
        const SiemEvent& event = events[15];
        REQUIRE(event.fields.at("Image") == templates[8].image);
        CHECK(pipeline_tokens(event.fields.at("CommandLine")) ==
              TokenSequence{"taskhostw", "exe", "install"});
    }
}

TEST_CASE("synth_benign rejects unusable configurations") {
    CHECK_THROWS_AS(synth_benign({}, SynthOptions{}), Error);

    SynthOptions bad_time;
    bad_time.start_time = "yesterday";
    CHECK_THROWS_AS(synth_benign(default_templates(), bad_time), Error);

    SynthOptions bad_span;
    bad_span.span_days = 0.0;
    CHECK_THROWS_AS(synth_benign(default_templates(), bad_span), BadRangeError);

    BenignTemplate unterminated;
    unterminated.text = "cmd {num10";
    SynthOptions one;
    one.volume = 1;
    CHECK_THROWS_AS(synth_benign({unterminated}, one), Error);

    BenignTemplate unknown;
    unknown.text = "cmd {nope}";
    CHECK_THROWS_AS(synth_benign({unknown}, one), Error);
}

TEST_CASE("bench_throughput reports cache behaviour and timing") {
    const ClassifierBundle& bundle = harness_bundle();

    SUBCASE("an empty corpus produces zeroed results") {
        ThroughputResult result =
            bench_throughput(bundle, std::vector<SiemEvent>{}, PipelineConfig{});
        CHECK(result.metrics.events_total == 0);
        CHECK(result.metrics.events_per_second == 0.0);
        CHECK(result.mean_event_us == 0.0);
        CHECK(result.cache_hit_rate == 0.0);
    }

    SUBCASE("a single-key corpus hits the cache on every repeat") {
        std::vector<SiemEvent> events;
        for (int i = 0; i < 500; ++i)
            events.push_back(testsupport::make_process_event(
                "c" + std::to_string(i), "certutil.exe -urlcache\" -split -f u"));
        ThroughputResult result = bench_throughput(bundle, events, PipelineConfig{});
        CHECK(result.metrics.events_total == 500);
        CHECK(result.metrics.cache_misses == 1);
        CHECK(result.metrics.cache_hits == 499);
        CHECK(result.cache_hit_rate == doctest::Approx(499.0 / 500.0));
        CHECK(result.metrics.evasion_alerts == 500);
        CHECK(result.metrics.wall_seconds > 0.0);
        CHECK(result.metrics.events_per_second > 0.0);
        CHECK(result.mean_event_us > 0.0);
        CHECK(result.stddev_event_us >= 0.0);

        auto doc = nlohmann::json::parse(throughput_to_json(result));
        CHECK(doc.at("events_total") == 500);
        CHECK(doc.at("cache_hit_rate").get<double>() ==
              doctest::Approx(499.0 / 500.0));
    }

    SUBCASE("disabling the cache zeroes the hit rate") {
        std::vector<SiemEvent> events;
        for (int i = 0; i < 50; ++i)
            events.push_back(testsupport::make_process_event(
                "c" + std::to_string(i), "certutil.exe -urlcache\" -split -f u"));
        PipelineConfig config;
        config.cache_capacity = 0;
        ThroughputResult result = bench_throughput(bundle, events, config);
        CHECK(result.cache_hit_rate == 0.0);
        CHECK(result.metrics.cache_hits == 0);
        CHECK(result.metrics.evasion_alerts == 50);
    }

    SUBCASE("the multi-worker path matches the serial counters") {
        std::vector<SiemEvent> events;
        for (int i = 0; i < 300; ++i) {
            const std::string suffix = std::to_string(i);
            events.push_back(testsupport::make_process_event(
                "w" + suffix, i % 2 == 0 ? "svchost.exe -k netsvcs"
                                         : "certutil.exe -urlcache\" -split -f " +
                                               suffix));
        }
        ThroughputResult serial = bench_throughput(bundle, events, PipelineConfig{});
        PipelineConfig parallel_config;
        parallel_config.workers = 2;
        parallel_config.cache_shards = 2;
        ThroughputResult parallel =
            bench_throughput(bundle, events, parallel_config);
        CHECK(parallel.metrics.events_total == serial.metrics.events_total);
        CHECK(parallel.metrics.alerts_total == serial.metrics.alerts_total);
        CHECK(parallel.metrics.evasion_alerts == serial.metrics.evasion_alerts);
        CHECK(parallel.stddev_event_us == 0.0);
    }
}
