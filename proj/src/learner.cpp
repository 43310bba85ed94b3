#include "amides/learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <ostream>
#include <unordered_map>

namespace amides {

std::size_t TrainingSet::count(Label label) const {
    std::size_t n = 0;
    for (Label l : labels)
        if (l == label) ++n;
    return n;
}

namespace {

std::string vector_key(const SparseFeatureVector& v) {
    std::string key;
    key.resize(v.entries.size() * (sizeof(std::uint32_t) + sizeof(double)));
    char* out = key.data();
    for (const auto& [idx, value] : v.entries) {
        std::memcpy(out, &idx, sizeof(idx));
        out += sizeof(idx);
        std::memcpy(out, &value, sizeof(value));
        out += sizeof(value);
    }
    return key;
}

}  // namespace

TrainingSet dedupe(const TrainingSet& set, DedupeReport* report) {
    TrainingSet out;
    DedupeReport stats;
    std::unordered_map<std::string, unsigned> seen;  // bit 0: benign, bit 1: malicious
    seen.reserve(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        const unsigned bit = set.labels[i] == Label::benign ? 1u : 2u;
        unsigned& mask = seen[vector_key(set.vectors[i])];
        if (mask & bit) {
            if (set.labels[i] == Label::benign) ++stats.collapsed_benign;
            else ++stats.collapsed_malicious;
            continue;
        }
        if (mask != 0) ++stats.cross_label_collisions;
        mask |= bit;
        out.vectors.push_back(set.vectors[i]);
        out.labels.push_back(set.labels[i]);
    }
    if (report) *report = stats;
    return out;
}

void class_weights(std::size_t n_benign, std::size_t n_malicious, bool balanced,
                   double& w_benign, double& w_malicious) {
    if (!balanced) {
        w_benign = w_malicious = 1.0;
        return;
    }
    const double total = static_cast<double>(n_benign + n_malicious);
    w_benign = total / (2.0 * static_cast<double>(n_benign));
    w_malicious = total / (2.0 * static_cast<double>(n_malicious));
}

double decision_value(const LinearModel& model, const SparseFeatureVector& v) {
    double sum = model.bias;
    for (const auto& [idx, value] : v.entries)
        if (idx < model.weights.size()) sum += model.weights[idx] * value;
    return sum;
}

LinearModel train_linear_svm(const TrainingSet& set, const TrainOptions& options) {
    if (options.c <= 0.0) throw BadRangeError("C must be positive");
    if (options.tol <= 0.0) throw BadRangeError("tol must be positive");
    const std::size_t n = set.size();
    const std::size_t n_malicious = set.count(Label::malicious);
    const std::size_t n_benign = n - n_malicious;
    if (n_benign == 0 || n_malicious == 0)
        throw DegenerateSetError("training set must contain both classes (" +
                                 std::to_string(n_benign) + " benign, " +
                                 std::to_string(n_malicious) + " malicious)");

    std::uint32_t dim = 0;
    for (const SparseFeatureVector& v : set.vectors)
        for (const auto& [idx, value] : v.entries) dim = std::max(dim, idx + 1);

    double w_benign, w_malicious;
    class_weights(n_benign, n_malicious, options.balanced, w_benign, w_malicious);

    // Dual coordinate descent on 0.5 a'Qa - e'a, 0 <= a_i <= C_i, with the
    // bias as an extra constant-1 feature. Shrinking stays off so the
    // iteration order (and thus the bits of the result) depend only on the
    // seed.
    std::vector<double> alpha(n, 0.0);
    std::vector<double> w(dim + 1, 0.0);  // w[dim] is the bias weight
    std::vector<double> q_diag(n);
    std::vector<double> upper(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sq = 1.0;  // constant bias feature
        for (const auto& [idx, value] : set.vectors[i].entries) sq += value * value;
        q_diag[i] = sq;
        y[i] = set.labels[i] == Label::malicious ? 1.0 : -1.0;
        upper[i] = options.c *
                   (set.labels[i] == Label::malicious ? w_malicious : w_benign);
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(options.seed);

    std::size_t epoch = 0;
    bool converged = false;
    for (; epoch < options.max_iter; ++epoch) {
        seeded_shuffle(order, rng);
        double pg_max = -std::numeric_limits<double>::infinity();
        double pg_min = std::numeric_limits<double>::infinity();
        for (std::size_t i : order) {
            const SparseFeatureVector& x = set.vectors[i];
            double g = w[dim];
            for (const auto& [idx, value] : x.entries) g += w[idx] * value;
            g = g * y[i] - 1.0;

            double pg = g;
            if (alpha[i] <= 0.0) pg = std::min(g, 0.0);
            else if (alpha[i] >= upper[i]) pg = std::max(g, 0.0);
            pg_max = std::max(pg_max, pg);
            pg_min = std::min(pg_min, pg);

            if (std::fabs(pg) > 1e-12) {
                const double old = alpha[i];
                alpha[i] = std::min(std::max(old - g / q_diag[i], 0.0), upper[i]);
                const double delta = (alpha[i] - old) * y[i];
                if (delta != 0.0) {
                    for (const auto& [idx, value] : x.entries) w[idx] += delta * value;
                    w[dim] += delta;
                }
            }
        }
        if (pg_max - pg_min <= options.tol) {
            converged = true;
            ++epoch;
            break;
        }
    }

    LinearModel model;
    model.bias = w[dim];
    w.pop_back();
    model.weights = std::move(w);
    model.c = options.c;
    model.balanced = options.balanced;
    model.meta = {n_benign, n_malicious, options.seed,   options.tol,
                  options.max_iter, epoch,       converged};
    return model;
}

std::vector<double> geometric_c_grid(double lo, double hi, std::size_t n) {
    if (lo <= 0.0) throw BadRangeError("grid lower bound must be positive");
    if (hi <= lo) throw BadRangeError("grid upper bound must exceed the lower bound");
    if (n < 2) throw BadRangeError("grid needs at least two points");
    std::vector<double> values(n);
    values.front() = lo;
    values.back() = hi;
    const double ratio = hi / lo;
    for (std::size_t i = 1; i + 1 < n; ++i)
        values[i] = lo * std::pow(ratio, static_cast<double>(i) /
                                             static_cast<double>(n - 1));
    return values;
}

std::vector<std::size_t> stratified_folds(const std::vector<Label>& labels,
                                          std::size_t k, std::uint64_t seed) {
    if (k < 2) throw BadRangeError("stratified folds need k >= 2");
    std::vector<std::size_t> benign_idx, malicious_idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] == Label::benign ? benign_idx : malicious_idx).push_back(i);
    if (benign_idx.size() < k || malicious_idx.size() < k)
        throw TooFewSamplesError("every class needs at least k=" + std::to_string(k) +
                                 " samples (" + std::to_string(benign_idx.size()) +
                                 " benign, " + std::to_string(malicious_idx.size()) +
                                 " malicious)");
    std::vector<std::size_t> fold_of(labels.size(), 0);
    std::mt19937_64 rng(seed);
    for (auto* idx : {&benign_idx, &malicious_idx}) {
        seeded_shuffle(*idx, rng);
        for (std::size_t pos = 0; pos < idx->size(); ++pos)
            fold_of[(*idx)[pos]] = pos % k;
    }
    return fold_of;
}

GridSearchResult grid_search(const TrainingSet& set, const HyperGrid& grid,
                             std::size_t folds, std::uint64_t seed, double tol,
                             std::size_t max_iter) {
    const std::vector<std::size_t> fold_of = stratified_folds(set.labels, folds, seed);

    CvReport report;
    report.folds = folds;
    report.seed = seed;
    std::size_t best_cell = 0;
    double best_mean = -1.0;

    std::size_t cell_id = 0;
    for (double c : grid.c_values) {
        for (bool balanced : grid.balanced_options) {
            CvCell cell;
            cell.cell_id = cell_id;
            cell.c = c;
            cell.balanced = balanced;
            double sum = 0.0;
            for (std::size_t f = 0; f < folds; ++f) {
                TrainingSet train;
                std::vector<double> scores;
                std::vector<Label> truth;
                for (std::size_t i = 0; i < set.size(); ++i) {
                    if (fold_of[i] == f) continue;
                    train.vectors.push_back(set.vectors[i]);
                    train.labels.push_back(set.labels[i]);
                }
                LinearModel model = train_linear_svm(
                    train, {c, balanced, tol, max_iter, mix_seed(seed, f)});
                for (std::size_t i = 0; i < set.size(); ++i) {
                    if (fold_of[i] != f) continue;
                    scores.push_back(decision_value(model, set.vectors[i]));
                    truth.push_back(set.labels[i]);
                }
                const double f1 = compute_metrics(scores, truth, 0.0).f1;
                cell.fold_f1.push_back(f1);
                sum += f1;
            }
            cell.mean_f1 = sum / static_cast<double>(folds);
            // Enumeration runs C ascending with balanced=false first, so
            // keeping the first strict maximum implements the tie-breaking.
            if (cell.mean_f1 > best_mean) {
                best_mean = cell.mean_f1;
                best_cell = cell_id;
            }
            report.cells.push_back(std::move(cell));
            ++cell_id;
        }
    }
    report.best_cell = best_cell;

    GridSearchResult result;
    result.c = report.cells[best_cell].c;
    result.balanced = report.cells[best_cell].balanced;
    result.report = std::move(report);
    result.model = train_linear_svm(
        set, {result.c, result.balanced, tol, max_iter, mix_seed(seed, 0xF1A1)});
    return result;
}

void write_cv_report_csv(const CvReport& report, std::ostream& out) {
    out << "cell_id,C,balanced,fold,f1\n";
    for (const CvCell& cell : report.cells)
        for (std::size_t f = 0; f < cell.fold_f1.size(); ++f)
            out << cell.cell_id << ',' << format_double(cell.c) << ','
                << (cell.balanced ? "true" : "false") << ',' << f << ','
                << format_double(cell.fold_f1[f]) << '\n';
}

Metrics compute_metrics(std::span<const double> scores, std::span<const Label> labels,
                        double threshold) {
    Metrics m;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] > threshold;
        const bool actual = labels[i] == Label::malicious;
        if (predicted && actual) ++m.tp;
        else if (predicted && !actual) ++m.fp;
        else if (!predicted && actual) ++m.fn;
        else ++m.tn;
    }
    m.precision = (m.tp + m.fp) ? static_cast<double>(m.tp) /
                                      static_cast<double>(m.tp + m.fp)
                                : 0.0;
    m.recall = (m.tp + m.fn) ? static_cast<double>(m.tp) /
                                   static_cast<double>(m.tp + m.fn)
                             : 0.0;
    m.f1 = (m.precision + m.recall > 0.0)
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    const double pp = static_cast<double>(m.tp + m.fp);
    const double ap = static_cast<double>(m.tp + m.fn);
    const double pn = static_cast<double>(m.tn + m.fn);
    const double an = static_cast<double>(m.tn + m.fp);
    if (pp > 0.0 && ap > 0.0 && pn > 0.0 && an > 0.0) {
        const double num = static_cast<double>(m.tp) * static_cast<double>(m.tn) -
                           static_cast<double>(m.fp) * static_cast<double>(m.fn);
        m.mcc = num / std::sqrt(pp * ap * pn * an);
    }
    return m;
}

}  // namespace amides
