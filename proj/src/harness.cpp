#include "amides/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>
#include <set>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "amides/attribution.hpp"
#include "amides/util.hpp"

namespace amides {

using ordered_json = nlohmann::ordered_json;

std::map<std::string, EventLabel> load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open label file: " + path);

    std::map<std::string, EventLabel> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto doc = nlohmann::json::parse(line, nullptr, false);
        if (!doc.is_object() || !doc.contains("id") || !doc["id"].is_string() ||
            !doc.contains("label") || !doc["label"].is_string()) {
            throw MalformedLineError("label line " + std::to_string(line_no) +
                                     ": expected {\"id\", \"label\", \"rule_id\"?}");
        }
        EventLabel entry;
        entry.label = doc["label"].get<std::string>();
        if (entry.label != "benign" && entry.label != "match" && entry.label != "evasion") {
            throw MalformedLineError("label line " + std::to_string(line_no) +
                                     ": unknown label '" + entry.label + "'");
        }
        if (doc.contains("rule_id")) {
            if (!doc["rule_id"].is_string()) {
                throw MalformedLineError("label line " + std::to_string(line_no) +
                                         ": rule_id must be a string");
            }
            entry.rule_id = doc["rule_id"].get<std::string>();
        }
        auto id = doc["id"].get<std::string>();
        if (!labels.emplace(id, std::move(entry)).second) {
            throw Error("duplicate label for event id '" + id + "'");
        }
    }
    return labels;
}

LabeledEvents split_by_label(const std::vector<SiemEvent>& events,
                             const std::map<std::string, EventLabel>& labels) {
    LabeledEvents out;
    for (const auto& event : events) {
        auto it = labels.find(event.id);
        if (it == labels.end()) throw Error("event '" + event.id + "' has no label");
        const EventLabel& entry = it->second;
        if (entry.label == "benign") {
            out.benign.push_back(event);
        } else if (entry.label == "match") {
            out.matches.push_back(event);
            if (!entry.rule_id.empty()) out.match_rule[event.id] = entry.rule_id;
        } else {
            out.evasions.push_back(event);
            if (!entry.rule_id.empty()) out.evasion_rule[event.id] = entry.rule_id;
        }
    }
    return out;
}

void split_by_time(const std::vector<SiemEvent>& events,
                   std::vector<SiemEvent>& earlier, std::vector<SiemEvent>& later) {
    std::int64_t lo = 0, hi = 0;
    bool seen = false;
    for (const auto& event : events) {
        if (!event.timestamp) continue;
        auto t = parse_iso8601(*event.timestamp);
        if (!t) continue;
        if (!seen) {
            lo = hi = *t;
            seen = true;
        } else {
            lo = std::min(lo, *t);
            hi = std::max(hi, *t);
        }
    }
    if (!seen) throw Error("split_by_time: no event carries a parseable timestamp");

    const std::int64_t cutoff = lo + (hi - lo) / 2;
    for (const auto& event : events) {
        std::optional<std::int64_t> t =
            event.timestamp ? parse_iso8601(*event.timestamp) : std::nullopt;
        // Untimestamped events are treated as historical, i.e. training data.
        if (!t || *t < cutoff) {
            earlier.push_back(event);
        } else {
            later.push_back(event);
        }
    }
}

namespace {

struct ScoredSet {
    std::vector<double> scores;
    std::vector<Label> labels;
    std::uint64_t fingerprint = 0;
};

ScoredSet score_events(const ClassifierBundle& bundle, const std::vector<SiemEvent>& benign,
                       const std::vector<SiemEvent>& evasions) {
    ScoredSet set;
    set.scores.reserve(benign.size() + evasions.size());
    set.labels.reserve(benign.size() + evasions.size());

    std::string blob;
    auto add = [&](const SiemEvent& event, Label label) {
        const std::string text = extract_text(event, bundle.selector);
        const SparseFeatureVector v = vectorize(pipeline_tokens(text), bundle.idf);
        const double score = decision_value(bundle.model, v);
        set.scores.push_back(score);
        set.labels.push_back(label);
        blob += event.id;
        blob += '\x1F';
        blob += label == Label::malicious ? 'e' : 'b';
        blob += '\x1F';
        blob += format_double(score);
        blob += '\x1E';
    };
    for (const auto& event : benign) add(event, Label::benign);
    for (const auto& event : evasions) add(event, Label::malicious);
    set.fingerprint = fnv1a64(blob);
    return set;
}

SweepReport sweep_scored(const ClassifierBundle& bundle, const ScoredSet& set,
                         std::size_t grid_points, bool insert_breakpoints) {
    if (grid_points < 2) throw BadRangeError("sweep grid needs at least 2 points");

    std::vector<double> units;
    units.reserve(grid_points);
    for (std::size_t i = 0; i < grid_points; ++i) {
        units.push_back(static_cast<double>(i) / static_cast<double>(grid_points - 1));
    }
    if (insert_breakpoints) {
        for (std::size_t i = 0; i < set.scores.size(); ++i) {
            if (set.labels[i] != Label::benign) continue;
            const double u = raw_to_unit(bundle.calibration, set.scores[i]);
            if (u > 0.0 && u < 1.0) units.push_back(u);
        }
    }
    std::sort(units.begin(), units.end());
    units.erase(std::unique(units.begin(), units.end()), units.end());

    SweepReport report;
    report.dataset_fingerprint = set.fingerprint;
    report.rows.reserve(units.size());
    for (double u : units) {
        SweepRow row;
        row.unit_threshold = u;
        row.raw_threshold = unit_to_raw(bundle.calibration, u);
        row.metrics = compute_metrics(set.scores, set.labels, row.raw_threshold);
        report.rows.push_back(row);
    }
    return report;
}

void append_metric_cells(std::string& out, const Metrics& m) {
    out += std::to_string(m.tp);
    out += ',';
    out += std::to_string(m.fp);
    out += ',';
    out += std::to_string(m.tn);
    out += ',';
    out += std::to_string(m.fn);
    out += ',';
    out += format_double(m.precision);
    out += ',';
    out += format_double(m.recall);
    out += ',';
    out += format_double(m.f1);
    out += ',';
    out += format_double(m.mcc);
}

ordered_json row_to_json(const SweepRow& row) {
    ordered_json obj;
    obj["unit_threshold"] = row.unit_threshold;
    obj["raw_threshold"] = row.raw_threshold;
    obj["tp"] = row.metrics.tp;
    obj["fp"] = row.metrics.fp;
    obj["tn"] = row.metrics.tn;
    obj["fn"] = row.metrics.fn;
    obj["precision"] = row.metrics.precision;
    obj["recall"] = row.metrics.recall;
    obj["f1"] = row.metrics.f1;
    obj["mcc"] = row.metrics.mcc;
    return obj;
}

}  // namespace

SweepReport sweep_thresholds(const ClassifierBundle& bundle,
                             const std::vector<SiemEvent>& benign,
                             const std::vector<SiemEvent>& evasions,
                             std::size_t grid_points, bool insert_breakpoints) {
    return sweep_scored(bundle, score_events(bundle, benign, evasions), grid_points,
                        insert_breakpoints);
}

void write_sweep_csv(const SweepReport& report, std::ostream& out) {
    out << "unit_threshold,raw_threshold,tp,fp,tn,fn,precision,recall,f1,mcc\n";
    for (const auto& row : report.rows) {
        std::string line = format_double(row.unit_threshold);
        line += ',';
        line += format_double(row.raw_threshold);
        line += ',';
        append_metric_cells(line, row.metrics);
        out << line << '\n';
    }
}

std::string sweep_to_json(const SweepReport& report) {
    ordered_json doc;
    doc["dataset_fingerprint"] = to_hex64(report.dataset_fingerprint);
    doc["rows"] = ordered_json::array();
    for (const auto& row : report.rows) doc["rows"].push_back(row_to_json(row));
    return doc.dump();
}

SweepReport benchmark_mode(const std::vector<RuleDefinition>& ruleset,
                           const std::vector<SiemEvent>& benign_train,
                           const std::vector<SiemEvent>& benign_validate,
                           const std::vector<SiemEvent>& matches,
                           const std::vector<SiemEvent>& evasions,
                           const FieldSelector& selector, const TrainerOptions& options) {
    std::set<std::string> match_ids;
    for (const auto& event : matches) match_ids.insert(event.id);
    for (const auto& event : evasions) {
        if (match_ids.count(event.id)) {
            throw Error("benchmark mode needs matches disjoint from evasions; '" +
                        event.id + "' appears in both");
        }
    }
    TrainerResult trained =
        train_benchmark_bundle(ruleset, benign_train, matches, selector, options);
    return sweep_thresholds(trained.bundle, benign_validate, evasions);
}

TaintReport taint_experiment(const std::vector<RuleDefinition>& ruleset,
                             const std::vector<SiemEvent>& benign_train,
                             const std::vector<SiemEvent>& benign_validate,
                             const std::vector<SiemEvent>& evasions,
                             const FieldSelector& selector,
                             const TrainerOptions& options,
                             const std::vector<double>& fractions,
                             std::size_t runs_per_fraction, std::uint64_t seed) {
    for (double f : fractions) {
        if (!(f >= 0.0 && f < 1.0)) throw BadRangeError("taint fractions must lie in [0, 1)");
    }
    if (runs_per_fraction == 0) throw BadRangeError("taint experiment needs at least 1 run");

    constexpr std::size_t kGridPoints = 101;
    TaintReport report;
    report.fractions = fractions;
    report.runs_per_fraction = runs_per_fraction;

    for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
        const double fraction = fractions[fi];
        const auto count = static_cast<std::size_t>(
            fraction * static_cast<double>(evasions.size()) + 0.5);

        for (std::size_t run = 0; run < runs_per_fraction; ++run) {
            std::mt19937_64 rng(mix_seed(seed, (static_cast<std::uint64_t>(fi) << 32) | run));
            std::vector<std::size_t> order(evasions.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            seeded_shuffle(order, rng);

            std::vector<bool> tainted(evasions.size(), false);
            for (std::size_t i = 0; i < count && i < order.size(); ++i) {
                tainted[order[i]] = true;
            }

            std::vector<SiemEvent> train = benign_train;
            std::vector<SiemEvent> validate_evasions;
            for (std::size_t i = 0; i < evasions.size(); ++i) {
                if (tainted[i]) {
                    train.push_back(evasions[i]);
                } else {
                    validate_evasions.push_back(evasions[i]);
                }
            }

            TrainerResult trained = train_bundle(ruleset, train, selector, options);
            TaintRun entry;
            entry.fraction = fraction;
            entry.run = run;
            entry.tainted = count;
            entry.sweep = sweep_thresholds(trained.bundle, benign_validate, validate_evasions,
                                           kGridPoints, /*insert_breakpoints=*/false);
            report.runs.push_back(std::move(entry));
        }
    }

    for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
        SweepReport mean;
        std::string blob;
        for (const auto& run : report.runs) {
            if (run.fraction != fractions[fi]) continue;
            blob += to_hex64(run.sweep.dataset_fingerprint);
            if (mean.rows.empty()) {
                mean.rows = run.sweep.rows;
                continue;
            }
            for (std::size_t t = 0; t < mean.rows.size(); ++t) {
                Metrics& acc = mean.rows[t].metrics;
                const Metrics& m = run.sweep.rows[t].metrics;
                acc.tp += m.tp;
                acc.fp += m.fp;
                acc.tn += m.tn;
                acc.fn += m.fn;
                acc.precision += m.precision;
                acc.recall += m.recall;
                acc.f1 += m.f1;
                acc.mcc += m.mcc;
                mean.rows[t].raw_threshold += run.sweep.rows[t].raw_threshold;
            }
        }
        const auto n = static_cast<double>(runs_per_fraction);
        for (auto& row : mean.rows) {
            row.raw_threshold /= n;
            row.metrics.precision /= n;
            row.metrics.recall /= n;
            row.metrics.f1 /= n;
            row.metrics.mcc /= n;
        }
        mean.dataset_fingerprint = fnv1a64(blob);
        report.mean_by_fraction.push_back(std::move(mean));
    }
    return report;
}

void write_taint_csv(const TaintReport& report, std::ostream& out) {
    out << "fraction,run,tainted,unit_threshold,raw_threshold,tp,fp,tn,fn,"
           "precision,recall,f1,mcc\n";
    for (const auto& run : report.runs) {
        for (const auto& row : run.sweep.rows) {
            std::string line = format_double(run.fraction);
            line += ',';
            line += std::to_string(run.run);
            line += ',';
            line += std::to_string(run.tainted);
            line += ',';
            line += format_double(row.unit_threshold);
            line += ',';
            line += format_double(row.raw_threshold);
            line += ',';
            append_metric_cells(line, row.metrics);
            out << line << '\n';
        }
    }
    for (std::size_t fi = 0; fi < report.mean_by_fraction.size(); ++fi) {
        for (const auto& row : report.mean_by_fraction[fi].rows) {
            std::string line = format_double(report.fractions[fi]);
            line += ",mean,,";
            line += format_double(row.unit_threshold);
            line += ',';
            line += format_double(row.raw_threshold);
            line += ',';
            append_metric_cells(line, row.metrics);
            out << line << '\n';
        }
    }
}

std::string taint_to_json(const TaintReport& report) {
    ordered_json doc;
    doc["fractions"] = report.fractions;
    doc["runs_per_fraction"] = report.runs_per_fraction;
    doc["runs"] = ordered_json::array();
    for (const auto& run : report.runs) {
        ordered_json obj;
        obj["fraction"] = run.fraction;
        obj["run"] = run.run;
        obj["tainted"] = run.tainted;
        obj["dataset_fingerprint"] = to_hex64(run.sweep.dataset_fingerprint);
        obj["rows"] = ordered_json::array();
        for (const auto& row : run.sweep.rows) obj["rows"].push_back(row_to_json(row));
        doc["runs"].push_back(std::move(obj));
    }
    doc["mean_by_fraction"] = ordered_json::array();
    for (std::size_t fi = 0; fi < report.mean_by_fraction.size(); ++fi) {
        ordered_json obj;
        obj["fraction"] = report.fractions[fi];
        obj["rows"] = ordered_json::array();
        for (const auto& row : report.mean_by_fraction[fi].rows) {
            obj["rows"].push_back(row_to_json(row));
        }
        doc["mean_by_fraction"].push_back(std::move(obj));
    }
    return doc.dump();
}

double RankHistogram::cumulative_fraction(std::size_t up_to_rank) const {
    if (detected == 0) return 0.0;
    std::size_t sum = 0;
    for (std::size_t r = 0; r < up_to_rank && r < counts.size(); ++r) sum += counts[r];
    return static_cast<double>(sum) / static_cast<double>(detected);
}

RankHistogram attribution_ranks(const ClassifierBundle& bundle,
                                const std::vector<SiemEvent>& evasions,
                                const std::map<std::string, std::string>& truth,
                                double unit_threshold, std::size_t top_n) {
    if (!bundle.attribution) throw Error("bundle carries no attribution models");

    RankHistogram histogram;
    histogram.counts.assign(top_n, 0);
    for (const auto& event : evasions) {
        auto it = truth.find(event.id);
        if (it == truth.end()) {
            throw Error("evasion '" + event.id + "' has no ground-truth rule id");
        }
        const std::string text = extract_text(event, bundle.selector);
        const Classification verdict = classify(bundle, text, unit_threshold);
        if (!verdict.evasion) {
            ++histogram.undetected;
            continue;
        }
        ++histogram.detected;
        const SparseFeatureVector v = vectorize(pipeline_tokens(text), bundle.idf);
        const AttributionList list = attribute(*bundle.attribution, v, top_n);
        if (auto rank = rank_of(list, it->second)) {
            ++histogram.counts[*rank - 1];
        } else {
            ++histogram.beyond;
        }
    }
    return histogram;
}

void write_ranks_csv(const RankHistogram& histogram, std::ostream& out) {
    out << "rank,count,cumulative_fraction\n";
    for (std::size_t r = 0; r < histogram.counts.size(); ++r) {
        out << (r + 1) << ',' << histogram.counts[r] << ','
            << format_double(histogram.cumulative_fraction(r + 1)) << '\n';
    }
    const double total = histogram.detected == 0 ? 0.0 : 1.0;
    out << "beyond," << histogram.beyond << ',' << format_double(total) << '\n';
}

std::string ranks_to_json(const RankHistogram& histogram) {
    ordered_json doc;
    doc["counts"] = histogram.counts;
    doc["beyond"] = histogram.beyond;
    doc["detected"] = histogram.detected;
    doc["undetected"] = histogram.undetected;
    doc["cumulative"] = ordered_json::array();
    for (std::size_t r = 1; r <= histogram.counts.size(); ++r) {
        doc["cumulative"].push_back(histogram.cumulative_fraction(r));
    }
    return doc.dump();
}

namespace {

std::string default_template_field(EventType type) {
    switch (type) {
        case EventType::process_creation: return "CommandLine";
        case EventType::web_request: return "url.full";
        case EventType::registry_change: return "TargetObject";
        case EventType::powershell_script: return "ScriptBlockText";
    }
    return "CommandLine";
}

BenignTemplate template_from_node(const YAML::Node& node) {
    if (!node.IsMap() || !node["text"]) {
        throw Error("benign template needs at least a 'text' key");
    }
    BenignTemplate tmpl;
    if (node["event_type"]) {
        const auto name = node["event_type"].as<std::string>();
        auto type = event_type_from_string(name);
        if (!type) throw Error("unknown event_type '" + name + "' in template");
        tmpl.event_type = *type;
    }
    tmpl.text = node["text"].as<std::string>();
    tmpl.field = node["field"] ? node["field"].as<std::string>()
                               : default_template_field(tmpl.event_type);
    if (node["image"]) tmpl.image = node["image"].as<std::string>();
    if (node["weight"]) {
        const auto weight = node["weight"].as<long long>();
        if (weight < 1) throw Error("template weight must be >= 1");
        tmpl.weight = static_cast<std::size_t>(weight);
    }
    return tmpl;
}

const std::vector<std::string>& pool(const std::string& name) {
    static const std::vector<std::string> words = {"report", "update",    "sync",
                                                   "backup", "inventory", "profile"};
    static const std::vector<std::string> paths = {"C:\\Users\\Public\\Documents",
                                                   "C:\\ProgramData\\CorpAgent",
                                                   "D:\\Shared\\Reports"};
    static const std::vector<std::string> hosts = {"intranet.corp.local", "files.corp.local",
                                                   "updates.corp.local", "portal.corp.local"};
    static const std::vector<std::string> users = {"alice", "bob", "carol", "dave", "erin"};
    static const std::vector<std::string> empty;
    if (name == "word") return words;
    if (name == "path") return paths;
    if (name == "host") return hosts;
    if (name == "user") return users;
    return empty;
}

// Placeholders: {num10} 10-digit id, {hex8} 8 hex chars with at least one
// digit (both prunable by design), {word}/{path}/{host}/{user} small pools.
std::string render_template(const std::string& text, std::mt19937_64& rng) {
    std::string out;
    out.reserve(text.size() + 16);
    std::size_t pos = 0;
    while (pos < text.size()) {
        if (text[pos] != '{') {
            out += text[pos++];
            continue;
        }
        const std::size_t close = text.find('}', pos);
        if (close == std::string::npos) throw Error("unterminated placeholder in template");
        const std::string name = text.substr(pos + 1, close - pos - 1);
        if (name == "num10") {
            out += static_cast<char>('1' + bounded_draw(rng, 9));
            for (int i = 0; i < 9; ++i) out += static_cast<char>('0' + bounded_draw(rng, 10));
        } else if (name == "hex8") {
            static const char kHex[] = "0123456789abcdef";
            std::string chunk;
            for (int i = 0; i < 8; ++i) chunk += kHex[bounded_draw(rng, 16)];
            if (chunk.find_first_of("0123456789") == std::string::npos) {
                chunk[0] = static_cast<char>('0' + bounded_draw(rng, 10));
            }
            out += chunk;
        } else {
            const auto& values = pool(name);
            if (values.empty()) throw Error("unknown template placeholder '{" + name + "}'");
            out += values[bounded_draw(rng, values.size())];
        }
        pos = close + 1;
    }
    return out;
}

}  // namespace

std::vector<BenignTemplate> load_templates(const std::string& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::Exception& e) {
        throw Error("cannot load templates from " + path + ": " + e.what());
    }
    const YAML::Node list =
        root.IsSequence() ? root : (root.IsMap() ? root["templates"] : YAML::Node());
    if (!list || !list.IsSequence()) {
        throw Error("template file must be a sequence or carry a 'templates' sequence");
    }
    std::vector<BenignTemplate> templates;
    for (const auto& node : list) templates.push_back(template_from_node(node));
    if (templates.empty()) throw Error("template file defines no templates");
    return templates;
}

std::vector<BenignTemplate> default_templates() {
    auto make = [](std::string image, std::string text, std::size_t weight) {
        BenignTemplate tmpl;
        tmpl.event_type = EventType::process_creation;
        tmpl.field = "CommandLine";
        tmpl.image = std::move(image);
        tmpl.text = std::move(text);
        tmpl.weight = weight;
        return tmpl;
    };
    return {
        make("C:\\Program Files\\Mozilla Firefox\\firefox.exe",
             "\"C:\\Program Files\\Mozilla Firefox\\firefox.exe\" -contentproc "
             "--channel={num10} -parentBuildID {num10}",
             3),
        make("C:\\Program Files\\Google\\Chrome\\Application\\chrome.exe",
             "\"C:\\Program Files\\Google\\Chrome\\Application\\chrome.exe\" "
             "--type=renderer --field-trial-handle={num10} --lang=en-US",
             3),
        make("C:\\Windows\\System32\\svchost.exe",
             "C:\\Windows\\System32\\svchost.exe -k netsvcs -p -s {word}Svc", 2),
        make("C:\\Windows\\System32\\conhost.exe",
             "\\??\\C:\\Windows\\system32\\conhost.exe 0xffffffff -ForceV1", 2),
        make("C:\\Program Files (x86)\\Microsoft\\Edge\\Application\\msedge.exe",
             "\"C:\\Program Files (x86)\\Microsoft\\Edge\\Application\\msedge.exe\" "
             "--type=utility --lang=en-US --mojo-platform-channel-handle={num10}",
             2),
        make("C:\\Program Files\\Microsoft Office\\root\\Office16\\WINWORD.EXE",
             "\"C:\\Program Files\\Microsoft Office\\root\\Office16\\WINWORD.EXE\" /n "
             "\"{path}\\{word}.docx\"",
             1),
        make("C:\\Program Files\\Adobe\\Acrobat DC\\Acrobat\\AcroRd32.exe",
             "\"C:\\Program Files\\Adobe\\Acrobat DC\\Acrobat\\AcroRd32.exe\" /n "
             "\"{path}\\{word}.pdf\"",
             1),
        make("C:\\Windows\\System32\\wbem\\WmiPrvSE.exe",
             "C:\\Windows\\system32\\wbem\\wmiprvse.exe -secured -Embedding", 1),
        make("C:\\Windows\\System32\\taskhostw.exe", "taskhostw.exe Install {hex8}", 1),
        make("C:\\Windows\\explorer.exe", "C:\\Windows\\Explorer.EXE /factory,{hex8} -Embedding",
             1),
        make("C:\\Windows\\System32\\WindowsPowerShell\\v1.0\\powershell.exe",
             "powershell.exe -NoProfile -ExecutionPolicy Bypass -File "
             "\"{path}\\{word}.ps1\"",
             1),
        make("C:\\Windows\\System32\\SearchIndexer.exe",
             "C:\\Windows\\system32\\SearchIndexer.exe /Embedding", 1),
        make("C:\\Windows\\System32\\wuauclt.exe",
             "C:\\Windows\\system32\\wuauclt.exe /UpdateDeploymentProvider "
             "UpdateDeploymentProvider.dll /RunHandlerComServer",
             1),
        make("C:\\Windows\\System32\\dllhost.exe",
             "C:\\Windows\\system32\\DllHost.exe /Processid:{hex8}", 1),
        make("C:\\Windows\\System32\\backgroundTaskHost.exe",
             "C:\\Windows\\system32\\backgroundTaskHost.exe "
             "-ServerName:App.AppXmv6u7jjw4cmcfqfqkrdqrcdrcmbc4v8b.mca",
             1),
    };
}

std::vector<SiemEvent> synth_benign(const std::vector<BenignTemplate>& templates,
                                    const SynthOptions& options) {
    if (templates.empty()) throw Error("synth_benign needs at least one template");
    auto start = parse_iso8601(options.start_time);
    if (!start) throw Error("synth_benign: unparseable start_time '" + options.start_time + "'");
    if (options.span_days <= 0.0) throw BadRangeError("synth_benign: span_days must be positive");

    // The template mix is a pure function of the ordinal so that two corpora
    // with different seeds differ only in placeholder values.
    std::vector<std::size_t> mix;
    for (std::size_t t = 0; t < templates.size(); ++t) {
        for (std::size_t w = 0; w < templates[t].weight; ++w) mix.push_back(t);
    }
    const auto span_seconds = static_cast<std::int64_t>(options.span_days * 86400.0);

    std::vector<SiemEvent> events;
    events.reserve(options.volume);
    for (std::size_t i = 0; i < options.volume; ++i) {
        const BenignTemplate& tmpl = templates[mix[i % mix.size()]];
        std::mt19937_64 rng(mix_seed(options.seed, i));

        SiemEvent event;
        event.event_type = tmpl.event_type;
        char id[24];
        std::snprintf(id, sizeof(id), "synth-%08zu", i);
        event.id = id;
        event.timestamp = format_iso8601(
            *start + static_cast<std::int64_t>(i) * span_seconds /
                         static_cast<std::int64_t>(options.volume));
        event.fields[tmpl.field] = render_template(tmpl.text, rng);
        if (!tmpl.image.empty()) event.fields["Image"] = tmpl.image;
        events.push_back(std::move(event));
    }
    return events;
}

ThroughputResult bench_throughput(const ClassifierBundle& bundle,
                                  std::span<const SiemEvent> events,
                                  const PipelineConfig& config) {
    using clock = std::chrono::steady_clock;
    DetectionPipeline pipeline(nullptr, &bundle, config);

    ThroughputResult result;
    RunMetrics& metrics = result.metrics;
    metrics.events_total = events.size();

    double wall = 0.0;
    if (config.workers <= 1) {
        // Timed in up to 100 chunks so a per-event dispersion estimate comes
        // out of the same single replay that produces the metrics.
        const std::size_t chunks = std::min<std::size_t>(events.size(), 100);
        std::vector<double> per_event_us;
        per_event_us.reserve(chunks);
        std::size_t begin = 0;
        for (std::size_t c = 0; c < chunks; ++c) {
            const std::size_t end = events.size() * (c + 1) / chunks;
            const auto t0 = clock::now();
            for (std::size_t i = begin; i < end; ++i) {
                if (auto alert = pipeline.process(events[i])) {
                    ++metrics.alerts_total;
                    if (!alert->rule_matches.empty()) ++metrics.rule_match_alerts;
                    if (alert->evasion) ++metrics.evasion_alerts;
                }
            }
            const double seconds = std::chrono::duration<double>(clock::now() - t0).count();
            wall += seconds;
            if (end > begin) {
                per_event_us.push_back(seconds * 1e6 / static_cast<double>(end - begin));
            }
            begin = end;
        }
        if (!per_event_us.empty()) {
            double mean = 0.0;
            for (double v : per_event_us) mean += v;
            mean /= static_cast<double>(per_event_us.size());
            double var = 0.0;
            for (double v : per_event_us) var += (v - mean) * (v - mean);
            result.stddev_event_us = std::sqrt(var / static_cast<double>(per_event_us.size()));
        }
    } else {
        const auto t0 = clock::now();
        RunMetrics parallel = replay_events(events, pipeline);
        wall = std::chrono::duration<double>(clock::now() - t0).count();
        metrics.alerts_total = parallel.alerts_total;
        metrics.rule_match_alerts = parallel.rule_match_alerts;
        metrics.evasion_alerts = parallel.evasion_alerts;
    }

    const CacheStats stats = pipeline.cache_stats();
    metrics.cache_hits = stats.hits;
    metrics.cache_misses = stats.misses;
    metrics.evictions = stats.evictions;
    metrics.wall_seconds = wall;
    metrics.events_per_second =
        wall > 0.0 ? static_cast<double>(events.size()) / wall : 0.0;
    result.mean_event_us =
        events.empty() ? 0.0 : wall * 1e6 / static_cast<double>(events.size());
    const double lookups = static_cast<double>(stats.hits + stats.misses);
    result.cache_hit_rate = lookups > 0.0 ? static_cast<double>(stats.hits) / lookups : 0.0;
    return result;
}

std::string throughput_to_json(const ThroughputResult& result) {
    ordered_json doc = ordered_json::parse(serialize_metrics(result.metrics));
    doc["cache_hit_rate"] = result.cache_hit_rate;
    doc["mean_event_us"] = result.mean_event_us;
    doc["stddev_event_us"] = result.stddev_event_us;
    return doc.dump();
}

}  // namespace amides
