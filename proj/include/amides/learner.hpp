#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "amides/features.hpp"

namespace amides {

struct BadRangeError : Error {
    using Error::Error;
};
struct DegenerateSetError : Error {
    using Error::Error;
};
struct TooFewSamplesError : Error {
    using Error::Error;
};

enum class Label : std::uint8_t { benign = 0, malicious = 1 };

struct TrainingSet {
    std::vector<SparseFeatureVector> vectors;
    std::vector<Label> labels;

    std::size_t size() const { return vectors.size(); }
    std::size_t count(Label label) const;
};

struct DedupeReport {
    std::size_t collapsed_benign = 0;
    std::size_t collapsed_malicious = 0;
    std::size_t cross_label_collisions = 0;
};

// Removes duplicate vectors per label, keeping first occurrence order. A
// vector seen under both labels is kept once per label and counted as a
// cross-label collision.
TrainingSet dedupe(const TrainingSet& set, DedupeReport* report = nullptr);

struct TrainOptions {
    double c = 1.0;
    bool balanced = false;
    double tol = 1e-4;
    std::size_t max_iter = 10000;
    std::uint64_t seed = 1;
};

struct TrainingMeta {
    std::size_t n_benign = 0;
    std::size_t n_malicious = 0;
    std::uint64_t seed = 0;
    double tol = 0.0;
    std::size_t max_iter = 0;
    std::size_t iterations_used = 0;
    bool converged = true;
};

struct LinearModel {
    std::vector<double> weights;
    double bias = 0.0;
    double c = 1.0;
    bool balanced = false;
    TrainingMeta meta;
};

double decision_value(const LinearModel& model, const SparseFeatureVector& v);

// w_c = n_total / (2 * n_c) when balanced, else 1 for both classes.
void class_weights(std::size_t n_benign, std::size_t n_malicious, bool balanced,
                   double& w_benign, double& w_malicious);

// L2-regularized L1-hinge SVM via dual coordinate descent with a constant
// augmented bias feature. Deterministic for a fixed seed.
LinearModel train_linear_svm(const TrainingSet& set, const TrainOptions& options);

// n log-spaced values from lo to hi with both endpoints exact.
std::vector<double> geometric_c_grid(double lo = 0.01, double hi = 10.0,
                                     std::size_t n = 25);

struct HyperGrid {
    std::vector<double> c_values = geometric_c_grid();
    std::vector<bool> balanced_options = {false, true};
};

// index -> fold id. Per-class seeded shuffle, then round-robin deal, so fold
// class ratios stay within one sample of the global ratio.
std::vector<std::size_t> stratified_folds(const std::vector<Label>& labels,
                                          std::size_t k, std::uint64_t seed);

struct CvCell {
    std::size_t cell_id = 0;
    double c = 1.0;
    bool balanced = false;
    std::vector<double> fold_f1;
    double mean_f1 = 0.0;
};

struct CvReport {
    std::vector<CvCell> cells;
    std::size_t best_cell = 0;
    std::size_t folds = 0;
    std::uint64_t seed = 0;
};

struct GridSearchResult {
    LinearModel model;  // retrained on the full set with the winning cell
    double c = 1.0;
    bool balanced = false;
    CvReport report;
};

GridSearchResult grid_search(const TrainingSet& set, const HyperGrid& grid,
                             std::size_t folds, std::uint64_t seed,
                             double tol = 1e-4, std::size_t max_iter = 10000);

void write_cv_report_csv(const CvReport& report, std::ostream& out);

struct Metrics {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0, mcc = 0.0;
};

// Predicted malicious iff score > threshold (strictly).
Metrics compute_metrics(std::span<const double> scores, std::span<const Label> labels,
                        double threshold);

}  // namespace amides
