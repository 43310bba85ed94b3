// Command-line front end: train bundles, classify event streams, forge
// evasion corpora, run the evaluation experiments, and benchmark throughput.
//
// Every long flag has a config-file key of the same name (dashes kept); a
// config file given via --config or $AMIDES_CONFIG overrides parsed flags.

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "amides/attribution.hpp"
#include "amides/classifier.hpp"
#include "amides/events.hpp"
#include "amides/forge.hpp"
#include "amides/harness.hpp"
#include "amides/pipeline.hpp"
#include "amides/rules.hpp"
#include "amides/trainer.hpp"
#include "amides/util.hpp"

namespace {

using amides::Error;
using ordered_json = nlohmann::ordered_json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One override hook per flag; applied after parsing when a config file wins.
struct ConfigBinding {
    std::string key;
    std::function<void(const YAML::Node&)> apply;
};

class Bindings {
  public:
    void add_string(const std::string& key, std::string& target) {
        entries_.push_back({key, [&target](const YAML::Node& n) {
                                target = n.as<std::string>();
                            }});
    }
    void add_double(const std::string& key, double& target) {
        entries_.push_back({key, [&target](const YAML::Node& n) { target = n.as<double>(); }});
    }
    void add_size(const std::string& key, std::size_t& target) {
        entries_.push_back({key, [&target](const YAML::Node& n) {
                                target = n.as<unsigned long long>();
                            }});
    }
    void add_uint64(const std::string& key, std::uint64_t& target) {
        entries_.push_back({key, [&target](const YAML::Node& n) {
                                target = n.as<unsigned long long>();
                            }});
    }
    void add_bool(const std::string& key, bool& target) {
        entries_.push_back({key, [&target](const YAML::Node& n) { target = n.as<bool>(); }});
    }
    void add_doubles(const std::string& key, std::vector<double>& target) {
        entries_.push_back({key, [&target](const YAML::Node& n) {
                                target = n.as<std::vector<double>>();
                            }});
    }

    void apply(const YAML::Node& config) const {
        for (const auto& binding : entries_) {
            if (const YAML::Node node = config[binding.key]) {
                try {
                    binding.apply(node);
                } catch (const YAML::Exception&) {
                    throw UsageError("config key '" + binding.key + "' has the wrong type");
                }
            }
        }
    }

  private:
    std::vector<ConfigBinding> entries_;
};

YAML::Node load_config(const std::string& explicit_path) {
    std::string path = explicit_path;
    if (path.empty()) {
        if (const char* env = std::getenv("AMIDES_CONFIG")) path = env;
    }
    if (path.empty()) return YAML::Node();
    try {
        YAML::Node root = YAML::LoadFile(path);
        if (!root.IsNull() && !root.IsMap()) {
            throw UsageError("config file must be a YAML map: " + path);
        }
        return root;
    } catch (const YAML::Exception& e) {
        throw UsageError("cannot load config '" + path + "': " + e.what());
    }
}

void check_unit_threshold(double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw UsageError("--threshold must lie in [0, 1]");
    }
}

amides::EventType parse_event_type(const std::string& name) {
    auto type = amides::event_type_from_string(name);
    if (!type) throw UsageError("unknown --event-type '" + name + "'");
    return *type;
}

std::vector<amides::SiemEvent> read_events_or_fail(const std::string& path, bool strict) {
    std::size_t malformed = 0;
    auto events = amides::read_events_file(path, strict, &malformed);
    if (malformed > 0) {
        std::cerr << "warning: skipped " << malformed << " malformed line(s) in " << path
                  << "\n";
    }
    return events;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open output file: " + path);
    return out;
}

void write_text_file(const std::string& path, const std::string& text) {
    auto out = open_output(path);
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
}

ordered_json trainer_report_json(const amides::TrainerReport& report) {
    ordered_json doc;
    doc["rules_total"] = report.rules_total;
    doc["rules_with_terms"] = report.rules_with_terms;
    doc["rules_without_terms"] = report.rules_without_terms;
    doc["benign_events"] = report.benign_events;
    doc["malicious_docs"] = report.malicious_docs;
    doc["training_rows"] = report.training_rows;
    doc["collapsed_benign"] = report.dedupe.collapsed_benign;
    doc["collapsed_malicious"] = report.dedupe.collapsed_malicious;
    doc["cross_label_collisions"] = report.dedupe.cross_label_collisions;
    doc["chosen_c"] = report.chosen_c;
    doc["chosen_balanced"] = report.chosen_balanced;
    doc["derived_days"] = report.derived_days;
    doc["attribution_skipped"] = report.attribution_skipped;
    doc["converged"] = report.converged;
    return doc;
}

// ---------------------------------------------------------------- train ----

struct TrainArgs {
    std::string rules_dir;
    std::string benign_path;
    std::string out_path;
    std::string matches_path;       // benchmark mode
    std::string selector_config;
    std::string event_type = "process_creation";
    std::string created_at;
    std::string cv_report_path;
    std::uint64_t seed = 42;
    std::size_t folds = 5;
    double tol = 1e-4;
    std::size_t max_iter = 10000;
    double n_per_day = 0.0;
    double days = 0.0;
    double epsilon = 1e-6;
    bool benchmark = false;
    bool no_attribution = false;
};

int cmd_train(const TrainArgs& args) {
    if (args.rules_dir.empty() || args.benign_path.empty() || args.out_path.empty()) {
        throw UsageError("train needs --rules, --benign and --out");
    }
    if (args.benchmark && args.matches_path.empty()) {
        throw UsageError("train --benchmark needs --matches");
    }

    auto ruleset = amides::load_ruleset(args.rules_dir);
    auto benign = read_events_or_fail(args.benign_path, /*strict=*/false);

    amides::SelectorSet selectors = args.selector_config.empty()
                                        ? amides::SelectorSet::defaults()
                                        : amides::load_selectors(args.selector_config);
    const amides::FieldSelector selector = selectors.for_type(parse_event_type(args.event_type));

    amides::TrainerOptions options;
    options.seed = args.seed;
    options.folds = args.folds;
    options.tol = args.tol;
    options.max_iter = args.max_iter;
    options.n_per_day = args.n_per_day;
    options.days = args.days;
    options.epsilon = args.epsilon;
    options.with_attribution = !args.no_attribution;
    options.created_at = args.created_at;

    amides::TrainerResult result;
    if (args.benchmark) {
        auto matches = read_events_or_fail(args.matches_path, /*strict=*/false);
        result = amides::train_benchmark_bundle(ruleset, benign, matches, selector, options);
    } else {
        result = amides::train_bundle(ruleset, benign, selector, options);
    }

    amides::save_bundle_file(result.bundle, args.out_path);
    if (!args.cv_report_path.empty()) {
        auto out = open_output(args.cv_report_path);
        amides::write_cv_report_csv(result.report.cv, out);
    }
    std::cout << trainer_report_json(result.report).dump() << "\n";
    return 0;
}

// ------------------------------------------------------------- classify ----

struct ClassifyArgs {
    std::string model_path;
    std::string events_path;
    std::string out_path;
    std::string rules_dir;
    std::string metrics_path;
    double threshold = 0.5;
    std::size_t top_n = 10;
    std::size_t cache_size = 1 << 16;
    std::size_t cache_shards = 1;
    std::size_t workers = 1;
    std::uint64_t metrics_interval = 0;
    bool strict = false;
};

int cmd_classify(const ClassifyArgs& args) {
    if (args.model_path.empty() && args.rules_dir.empty()) {
        throw UsageError("classify needs --model and/or --rules");
    }
    if (args.events_path.empty()) throw UsageError("classify needs --events");
    check_unit_threshold(args.threshold);

    std::optional<amides::ClassifierBundle> bundle;
    if (!args.model_path.empty()) bundle = amides::load_bundle_file(args.model_path);
    std::vector<amides::RuleDefinition> ruleset;
    if (!args.rules_dir.empty()) ruleset = amides::load_ruleset(args.rules_dir);

    amides::PipelineConfig config;
    config.unit_threshold = args.threshold;
    config.top_n = args.top_n;
    config.cache_capacity = args.cache_size;
    config.cache_shards = args.cache_shards;
    config.workers = args.workers;
    config.strict = args.strict;

    std::ifstream events_file;
    std::istream* events = &std::cin;
    if (args.events_path != "-") {
        events_file.open(args.events_path, std::ios::binary);
        if (!events_file) throw Error("cannot open events file: " + args.events_path);
        events = &events_file;
    }

    std::ofstream alerts_file;
    std::ostream* alerts = &std::cout;
    if (!args.out_path.empty()) {
        alerts_file = open_output(args.out_path);
        alerts = &alerts_file;
    }

    std::ofstream metrics_file;
    std::ostream* metrics_sink = &std::cerr;
    if (!args.metrics_path.empty()) {
        metrics_file = open_output(args.metrics_path);
        metrics_sink = &metrics_file;
    }

    const amides::RunMetrics metrics = amides::run_stream(
        *events, *alerts, ruleset.empty() ? nullptr : &ruleset,
        bundle ? &*bundle : nullptr, config,
        args.metrics_interval > 0 ? metrics_sink : nullptr, args.metrics_interval);
    *metrics_sink << amides::serialize_metrics(metrics) << "\n";
    return 0;
}

// ---------------------------------------------------------------- forge ----

struct ForgeArgs {
    std::string rules_dir;
    std::string matches_path;
    std::string recipes_path;
    std::string out_path;
    std::string labels_out;
    std::string selector_config;
    bool audit = false;
};

int cmd_forge(const ForgeArgs& args) {
    if (args.rules_dir.empty() || args.matches_path.empty() || args.recipes_path.empty()) {
        throw UsageError("forge needs --rules, --matches and --recipes");
    }
    if (!args.audit && args.out_path.empty()) {
        throw UsageError("forge needs --out (or --audit)");
    }

    auto ruleset = amides::load_ruleset(args.rules_dir);
    auto matches = read_events_or_fail(args.matches_path, /*strict=*/false);
    auto recipes = amides::load_recipes(args.recipes_path);
    amides::SelectorSet selectors = args.selector_config.empty()
                                        ? amides::SelectorSet::defaults()
                                        : amides::load_selectors(args.selector_config);

    if (args.audit) {
        const auto audits = amides::audit_ruleset(ruleset, matches, recipes, selectors);
        ordered_json doc = ordered_json::array();
        for (const auto& audit : audits) {
            ordered_json row;
            row["rule_id"] = audit.rule_id;
            row["branches_total"] = audit.branches_total;
            row["branches_evaded"] = audit.branches_evaded;
            row["label"] = std::string(amides::to_string(audit.label));
            doc.push_back(std::move(row));
        }
        std::cout << doc.dump(2) << "\n";
        return 0;
    }

    std::ofstream corpus = open_output(args.out_path);
    std::ofstream labels;
    if (!args.labels_out.empty()) labels = open_output(args.labels_out);

    std::size_t produced = 0, evading = 0;
    for (const auto& rule : ruleset) {
        for (const auto& event : matches) {
            if (event.event_type != rule.event_type) continue;
            if (!amides::match_event(rule, event)) continue;
            const auto results =
                amides::generate_evasions(event, rule, ruleset, recipes, selectors);
            for (const auto& result : results) {
                corpus << amides::serialize_event(result.variant) << "\n";
                ++produced;
                if (result.valid()) ++evading;
                if (labels.is_open()) {
                    // A variant only counts as an evasion when no rule fires on
                    // it any more; otherwise it is still a match (of the target
                    // or of whichever other rule caught it).
                    ordered_json label;
                    label["id"] = result.variant.id;
                    label["label"] = result.valid() ? "evasion" : "match";
                    label["rule_id"] = result.evades_target && !result.other_matches.empty()
                                           ? result.other_matches.front()
                                           : result.target_rule_id;
                    label["evades_target"] = result.evades_target;
                    labels << label.dump() << "\n";
                }
            }
        }
    }
    std::cerr << "forged " << produced << " variant(s), " << evading
              << " fully evading their target rule\n";
    return 0;
}

// ------------------------------------------------------------- evaluate ----

struct EvaluateArgs {
    std::string mode;  // sweep | benchmark | taint | ranks | synth
    std::string model_path;
    std::string rules_dir;
    std::string events_path;
    std::string labels_path;
    std::string selector_config;
    std::string event_type = "process_creation";
    std::string csv_path;
    std::string json_path;
    std::string out_path;        // synth corpus
    std::string labels_out;      // synth labels
    std::string templates_path;  // synth templates
    std::string start_time = "2022-05-02T00:00:00Z";
    double span_days = 28.0;
    std::size_t volume = 10000;
    std::uint64_t seed = 42;
    std::size_t folds = 5;
    double n_per_day = 0.0;
    double days = 0.0;
    double threshold = 0.5;
    std::size_t top_n = 10;
    std::size_t grid_points = 101;
    bool no_breakpoints = false;
    std::vector<double> fractions = {0.0, 0.1, 0.2, 0.3};
    std::size_t runs = 10;
};

amides::TrainerOptions evaluate_trainer_options(const EvaluateArgs& args) {
    amides::TrainerOptions options;
    options.seed = args.seed;
    options.folds = args.folds;
    options.n_per_day = args.n_per_day;
    options.days = args.days;
    return options;
}

void emit_sweep(const EvaluateArgs& args, const amides::SweepReport& report) {
    if (!args.csv_path.empty()) {
        auto out = open_output(args.csv_path);
        amides::write_sweep_csv(report, out);
    }
    const std::string json = amides::sweep_to_json(report);
    if (!args.json_path.empty()) {
        write_text_file(args.json_path, json);
    }
    if (args.csv_path.empty() && args.json_path.empty()) std::cout << json << "\n";
}

int cmd_evaluate(const EvaluateArgs& args) {
    check_unit_threshold(args.threshold);

    if (args.mode == "synth") {
        if (args.out_path.empty()) throw UsageError("evaluate synth needs --out");
        const auto templates = args.templates_path.empty()
                                   ? amides::default_templates()
                                   : amides::load_templates(args.templates_path);
        amides::SynthOptions options;
        options.volume = args.volume;
        options.seed = args.seed;
        options.start_time = args.start_time;
        options.span_days = args.span_days;
        const auto events = amides::synth_benign(templates, options);

        auto out = open_output(args.out_path);
        std::ofstream labels;
        if (!args.labels_out.empty()) labels = open_output(args.labels_out);
        for (const auto& event : events) {
            out << amides::serialize_event(event) << "\n";
            if (labels.is_open()) {
                ordered_json label;
                label["id"] = event.id;
                label["label"] = "benign";
                labels << label.dump() << "\n";
            }
        }
        std::cerr << "wrote " << events.size() << " benign event(s)\n";
        return 0;
    }

    if (args.events_path.empty() || args.labels_path.empty()) {
        throw UsageError("evaluate " + args.mode + " needs --events and --labels");
    }
    const auto events = read_events_or_fail(args.events_path, /*strict=*/false);
    const auto labels = amides::load_labels(args.labels_path);
    const amides::LabeledEvents split = amides::split_by_label(events, labels);

    if (args.mode == "sweep" || args.mode == "ranks") {
        if (args.model_path.empty()) {
            throw UsageError("evaluate " + args.mode + " needs --model");
        }
        const auto bundle = amides::load_bundle_file(args.model_path);
        if (args.mode == "sweep") {
            emit_sweep(args, amides::sweep_thresholds(bundle, split.benign, split.evasions,
                                                      args.grid_points, !args.no_breakpoints));
            return 0;
        }
        const auto histogram = amides::attribution_ranks(bundle, split.evasions,
                                                         split.evasion_rule, args.threshold,
                                                         args.top_n);
        if (!args.csv_path.empty()) {
            auto out = open_output(args.csv_path);
            amides::write_ranks_csv(histogram, out);
        }
        const std::string json = amides::ranks_to_json(histogram);
        if (!args.json_path.empty()) write_text_file(args.json_path, json);
        if (args.csv_path.empty() && args.json_path.empty()) std::cout << json << "\n";
        return 0;
    }

    if (args.rules_dir.empty()) {
        throw UsageError("evaluate " + args.mode + " needs --rules");
    }
    const auto ruleset = amides::load_ruleset(args.rules_dir);
    amides::SelectorSet selectors = args.selector_config.empty()
                                        ? amides::SelectorSet::defaults()
                                        : amides::load_selectors(args.selector_config);
    const amides::FieldSelector selector = selectors.for_type(parse_event_type(args.event_type));

    std::vector<amides::SiemEvent> benign_train, benign_validate;
    amides::split_by_time(split.benign, benign_train, benign_validate);

    if (args.mode == "benchmark") {
        emit_sweep(args, amides::benchmark_mode(ruleset, benign_train, benign_validate,
                                                split.matches, split.evasions, selector,
                                                evaluate_trainer_options(args)));
        return 0;
    }
    if (args.mode == "taint") {
        const auto report = amides::taint_experiment(
            ruleset, benign_train, benign_validate, split.evasions, selector,
            evaluate_trainer_options(args), args.fractions, args.runs, args.seed);
        if (!args.csv_path.empty()) {
            auto out = open_output(args.csv_path);
            amides::write_taint_csv(report, out);
        }
        const std::string json = amides::taint_to_json(report);
        if (!args.json_path.empty()) write_text_file(args.json_path, json);
        if (args.csv_path.empty() && args.json_path.empty()) std::cout << json << "\n";
        return 0;
    }
    throw UsageError("unknown evaluate mode '" + args.mode + "'");
}

// ---------------------------------------------------------------- bench ----

struct BenchArgs {
    std::string model_path;
    std::string events_path;
    std::size_t synth_volume = 0;
    std::uint64_t synth_seed = 7;
    double threshold = 0.5;
    std::size_t cache_size = 1 << 16;
    std::size_t cache_shards = 1;
    std::size_t workers = 1;
};

int cmd_bench(const BenchArgs& args) {
    if (args.model_path.empty()) throw UsageError("bench needs --model");
    if (args.events_path.empty() && args.synth_volume == 0) {
        throw UsageError("bench needs --events or --synth-volume");
    }
    check_unit_threshold(args.threshold);

    const auto bundle = amides::load_bundle_file(args.model_path);
    std::vector<amides::SiemEvent> events;
    if (!args.events_path.empty()) {
        events = read_events_or_fail(args.events_path, /*strict=*/false);
    } else {
        amides::SynthOptions options;
        options.volume = args.synth_volume;
        options.seed = args.synth_seed;
        events = amides::synth_benign(amides::default_templates(), options);
    }

    amides::PipelineConfig config;
    config.unit_threshold = args.threshold;
    config.cache_capacity = args.cache_size;
    config.cache_shards = args.cache_shards;
    config.workers = args.workers;

    const auto result = amides::bench_throughput(bundle, events, config);
    if (result.metrics.events_total == 0) {
        std::cerr << "warning: no events replayed; events_per_second reported as 0\n";
    }
    std::cout << amides::throughput_to_json(result) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive misuse detection: rule matching plus evasion classification"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path,
                   "YAML config file; keys mirror long flags and override them "
                   "(default: $AMIDES_CONFIG)");
    // Let --config work after the subcommand name too, not just before it.
    app.fallthrough();

    TrainArgs train;
    Bindings train_bindings;
    auto* train_cmd = app.add_subcommand("train", "Fit a classifier bundle from rules + benign events");
    train_cmd->add_option("--rules", train.rules_dir, "Rule directory (.yml/.yaml)");
    train_cmd->add_option("--benign", train.benign_path, "Benign events JSONL");
    train_cmd->add_option("--out", train.out_path, "Bundle output path (.amides)");
    train_cmd->add_option("--matches", train.matches_path, "Match events JSONL (benchmark mode)");
    train_cmd->add_flag("--benchmark", train.benchmark,
                        "Learn from matching events instead of rule terms");
    train_cmd->add_option("--selector-config", train.selector_config, "Selector overrides YAML");
    train_cmd->add_option("--event-type", train.event_type, "Event type to train for");
    train_cmd->add_option("--seed", train.seed, "Training seed");
    train_cmd->add_option("--folds", train.folds, "Cross-validation folds");
    train_cmd->add_option("--tol", train.tol, "Solver stopping tolerance");
    train_cmd->add_option("--max-iter", train.max_iter, "Solver epoch cap");
    train_cmd->add_option("--n-per-day", train.n_per_day, "Calibration false-alert budget per day");
    train_cmd->add_option("--days", train.days, "Calibration day span (0 = derive from timestamps)");
    train_cmd->add_option("--epsilon", train.epsilon, "Calibration threshold margin");
    train_cmd->add_flag("--no-attribution", train.no_attribution, "Skip per-rule attribution models");
    train_cmd->add_option("--created-at", train.created_at, "Timestamp stored in bundle metadata");
    train_cmd->add_option("--cv-report", train.cv_report_path, "Write grid-search folds CSV here");
    train_bindings.add_string("rules", train.rules_dir);
    train_bindings.add_string("benign", train.benign_path);
    train_bindings.add_string("out", train.out_path);
    train_bindings.add_string("matches", train.matches_path);
    train_bindings.add_bool("benchmark", train.benchmark);
    train_bindings.add_string("selector-config", train.selector_config);
    train_bindings.add_string("event-type", train.event_type);
    train_bindings.add_uint64("seed", train.seed);
    train_bindings.add_size("folds", train.folds);
    train_bindings.add_double("tol", train.tol);
    train_bindings.add_size("max-iter", train.max_iter);
    train_bindings.add_double("n-per-day", train.n_per_day);
    train_bindings.add_double("days", train.days);
    train_bindings.add_double("epsilon", train.epsilon);
    train_bindings.add_bool("no-attribution", train.no_attribution);
    train_bindings.add_string("created-at", train.created_at);
    train_bindings.add_string("cv-report", train.cv_report_path);

    ClassifyArgs classify;
    Bindings classify_bindings;
    auto* classify_cmd = app.add_subcommand("classify", "Stream events through the detection pipeline");
    classify_cmd->add_option("--model", classify.model_path, "Classifier bundle (.amides)");
    classify_cmd->add_option("--events", classify.events_path, "Events JSONL ('-' = stdin)");
    classify_cmd->add_option("--out", classify.out_path, "Alerts JSONL (default stdout)");
    classify_cmd->add_option("--rules", classify.rules_dir, "Rule directory for the matching stage");
    classify_cmd->add_option("--threshold", classify.threshold, "Unit decision threshold in [0,1]");
    classify_cmd->add_option("--top-n", classify.top_n, "Attribution list length");
    classify_cmd->add_option("--cache-size", classify.cache_size, "Score cache capacity (0 = off)");
    classify_cmd->add_option("--cache-shards", classify.cache_shards, "Score cache shard count");
    classify_cmd->add_option("--workers", classify.workers, "Worker threads");
    classify_cmd->add_option("--metrics", classify.metrics_path, "Metrics JSON file (default stderr)");
    classify_cmd->add_option("--metrics-interval", classify.metrics_interval,
                             "Emit metrics snapshot every N events");
    classify_cmd->add_flag("--strict", classify.strict, "Fail on malformed event lines");
    classify_bindings.add_string("model", classify.model_path);
    classify_bindings.add_string("events", classify.events_path);
    classify_bindings.add_string("out", classify.out_path);
    classify_bindings.add_string("rules", classify.rules_dir);
    classify_bindings.add_double("threshold", classify.threshold);
    classify_bindings.add_size("top-n", classify.top_n);
    classify_bindings.add_size("cache-size", classify.cache_size);
    classify_bindings.add_size("cache-shards", classify.cache_shards);
    classify_bindings.add_size("workers", classify.workers);
    classify_bindings.add_string("metrics", classify.metrics_path);
    classify_bindings.add_uint64("metrics-interval", classify.metrics_interval);
    classify_bindings.add_bool("strict", classify.strict);

    ForgeArgs forge;
    Bindings forge_bindings;
    auto* forge_cmd = app.add_subcommand("forge", "Generate evasion variants from matching events");
    forge_cmd->add_option("--rules", forge.rules_dir, "Rule directory");
    forge_cmd->add_option("--matches", forge.matches_path, "Matching events JSONL");
    forge_cmd->add_option("--recipes", forge.recipes_path, "Evasion recipes YAML");
    forge_cmd->add_option("--out", forge.out_path, "Variant corpus JSONL");
    forge_cmd->add_option("--labels-out", forge.labels_out, "Ground-truth sidecar JSONL");
    forge_cmd->add_option("--selector-config", forge.selector_config, "Selector overrides YAML");
    forge_cmd->add_flag("--audit", forge.audit, "Report per-rule evadability instead of a corpus");
    forge_bindings.add_string("rules", forge.rules_dir);
    forge_bindings.add_string("matches", forge.matches_path);
    forge_bindings.add_string("recipes", forge.recipes_path);
    forge_bindings.add_string("out", forge.out_path);
    forge_bindings.add_string("labels-out", forge.labels_out);
    forge_bindings.add_string("selector-config", forge.selector_config);
    forge_bindings.add_bool("audit", forge.audit);

    EvaluateArgs evaluate;
    Bindings evaluate_bindings;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Run harness experiments");
    evaluate_cmd->add_option("mode", evaluate.mode, "sweep | benchmark | taint | ranks | synth")
        ->required();
    evaluate_cmd->add_option("--model", evaluate.model_path, "Classifier bundle (.amides)");
    evaluate_cmd->add_option("--rules", evaluate.rules_dir, "Rule directory");
    evaluate_cmd->add_option("--events", evaluate.events_path, "Labeled corpus JSONL");
    evaluate_cmd->add_option("--labels", evaluate.labels_path, "Ground-truth sidecar JSONL");
    evaluate_cmd->add_option("--selector-config", evaluate.selector_config, "Selector overrides YAML");
    evaluate_cmd->add_option("--event-type", evaluate.event_type, "Event type under evaluation");
    evaluate_cmd->add_option("--csv", evaluate.csv_path, "Report CSV path");
    evaluate_cmd->add_option("--json", evaluate.json_path, "Report JSON path");
    evaluate_cmd->add_option("--out", evaluate.out_path, "Synth corpus JSONL");
    evaluate_cmd->add_option("--labels-out", evaluate.labels_out, "Synth labels JSONL");
    evaluate_cmd->add_option("--templates", evaluate.templates_path, "Benign templates YAML");
    evaluate_cmd->add_option("--start-time", evaluate.start_time, "Synth corpus start timestamp");
    evaluate_cmd->add_option("--span-days", evaluate.span_days, "Synth corpus time span");
    evaluate_cmd->add_option("--volume", evaluate.volume, "Synth corpus size");
    evaluate_cmd->add_option("--seed", evaluate.seed, "Experiment seed");
    evaluate_cmd->add_option("--folds", evaluate.folds, "Cross-validation folds");
    evaluate_cmd->add_option("--n-per-day", evaluate.n_per_day, "Calibration budget per day");
    evaluate_cmd->add_option("--days", evaluate.days, "Calibration day span");
    evaluate_cmd->add_option("--threshold", evaluate.threshold, "Unit threshold for ranks");
    evaluate_cmd->add_option("--top-n", evaluate.top_n, "Attribution list length");
    evaluate_cmd->add_option("--grid-points", evaluate.grid_points, "Uniform sweep grid size");
    evaluate_cmd->add_flag("--no-breakpoints", evaluate.no_breakpoints,
                           "Skip exact benign-score thresholds");
    evaluate_cmd->add_option("--fractions", evaluate.fractions, "Taint fractions");
    evaluate_cmd->add_option("--runs", evaluate.runs, "Taint runs per fraction");
    evaluate_bindings.add_string("model", evaluate.model_path);
    evaluate_bindings.add_string("rules", evaluate.rules_dir);
    evaluate_bindings.add_string("events", evaluate.events_path);
    evaluate_bindings.add_string("labels", evaluate.labels_path);
    evaluate_bindings.add_string("selector-config", evaluate.selector_config);
    evaluate_bindings.add_string("event-type", evaluate.event_type);
    evaluate_bindings.add_string("csv", evaluate.csv_path);
    evaluate_bindings.add_string("json", evaluate.json_path);
    evaluate_bindings.add_string("out", evaluate.out_path);
    evaluate_bindings.add_string("labels-out", evaluate.labels_out);
    evaluate_bindings.add_string("templates", evaluate.templates_path);
    evaluate_bindings.add_string("start-time", evaluate.start_time);
    evaluate_bindings.add_double("span-days", evaluate.span_days);
    evaluate_bindings.add_size("volume", evaluate.volume);
    evaluate_bindings.add_uint64("seed", evaluate.seed);
    evaluate_bindings.add_size("folds", evaluate.folds);
    evaluate_bindings.add_double("n-per-day", evaluate.n_per_day);
    evaluate_bindings.add_double("days", evaluate.days);
    evaluate_bindings.add_double("threshold", evaluate.threshold);
    evaluate_bindings.add_size("top-n", evaluate.top_n);
    evaluate_bindings.add_size("grid-points", evaluate.grid_points);
    evaluate_bindings.add_bool("no-breakpoints", evaluate.no_breakpoints);
    evaluate_bindings.add_doubles("fractions", evaluate.fractions);
    evaluate_bindings.add_size("runs", evaluate.runs);

    BenchArgs bench;
    Bindings bench_bindings;
    auto* bench_cmd = app.add_subcommand("bench", "Measure replay throughput");
    bench_cmd->add_option("--model", bench.model_path, "Classifier bundle (.amides)");
    bench_cmd->add_option("--events", bench.events_path, "Events JSONL");
    bench_cmd->add_option("--synth-volume", bench.synth_volume,
                          "Generate this many benign events instead of --events");
    bench_cmd->add_option("--synth-seed", bench.synth_seed, "Seed for generated events");
    bench_cmd->add_option("--threshold", bench.threshold, "Unit decision threshold");
    bench_cmd->add_option("--cache-size", bench.cache_size, "Score cache capacity");
    bench_cmd->add_option("--cache-shards", bench.cache_shards, "Score cache shard count");
    bench_cmd->add_option("--workers", bench.workers, "Worker threads");
    bench_bindings.add_string("model", bench.model_path);
    bench_bindings.add_string("events", bench.events_path);
    bench_bindings.add_size("synth-volume", bench.synth_volume);
    bench_bindings.add_uint64("synth-seed", bench.synth_seed);
    bench_bindings.add_double("threshold", bench.threshold);
    bench_bindings.add_size("cache-size", bench.cache_size);
    bench_bindings.add_size("cache-shards", bench.cache_shards);
    bench_bindings.add_size("workers", bench.workers);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        const YAML::Node config = load_config(config_path);
        if (config && config.IsMap()) {
            if (train_cmd->parsed()) train_bindings.apply(config);
            if (classify_cmd->parsed()) classify_bindings.apply(config);
            if (forge_cmd->parsed()) forge_bindings.apply(config);
            if (evaluate_cmd->parsed()) evaluate_bindings.apply(config);
            if (bench_cmd->parsed()) bench_bindings.apply(config);
        }
        if (train_cmd->parsed()) return cmd_train(train);
        if (classify_cmd->parsed()) return cmd_classify(classify);
        if (forge_cmd->parsed()) return cmd_forge(forge);
        if (evaluate_cmd->parsed()) return cmd_evaluate(evaluate);
        if (bench_cmd->parsed()) return cmd_bench(bench);
        std::cerr << "no subcommand given\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
