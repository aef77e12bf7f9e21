#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "wmbench/mlp.hpp"

namespace wmbench {

struct FoldMetrics {
    int fold = 0;
    long n_test = 0;
    double accuracy = 0.0;
    double auc = 0.0;
    double false_unwatermarked_rate = 0.0; // watermarked classified as unwatermarked
    double false_watermarked_rate = 0.0;   // unwatermarked classified as watermarked
};

struct Metrics {
    double accuracy = 0.0;
    double auc = 0.0;
    double false_unwatermarked_rate = 0.0;
    double false_watermarked_rate = 0.0;
    long tp = 0, tn = 0, fp = 0, fn = 0;
    std::vector<FoldMetrics> folds;
};

// Probability that a random positive outranks a random negative; ties count
// 0.5. Rank-based; tests verify it against the O(n^2) pairwise oracle.
// Throws if only one class is present.
double auc_score(const std::vector<double>& scores, const std::vector<int>& labels);

// Confusion-based metrics at the 0.5 threshold, with AUC attached.
Metrics metrics_from_scores(const std::vector<double>& scores, const std::vector<int>& labels);

// Shuffled k-fold index partition: every index appears in exactly one fold.
struct FoldSplit {
    int k = 5;
    uint64_t seed = 0;
    std::vector<std::vector<size_t>> fold_indices;
};
FoldSplit make_folds(size_t n, int k, uint64_t seed); // throws if k < 2 or k > n

// k-fold cross-validation of the MLP: trains on k-1 folds, scores the held
// out fold, pools all held-out scores for the aggregate metrics and keeps the
// per-fold breakdown.
Metrics kfold_evaluate(const Dataset& dataset, const std::vector<int>& hidden_sizes,
                       const TrainConfig& config, int k = 5, uint64_t seed = 0);

// The hyperparameter grid: 3 learning rates x 3 weight decays x 3 batch
// sizes x shuffle on/off = 54 configurations.
inline const std::array<double, 3> kGridLearningRates = {2e-5, 2e-4, 2e-3};
inline const std::array<double, 3> kGridWeightDecays = {2e-4, 2e-3, 2e-2};
inline const std::array<int, 3> kGridBatchSizes = {50, 75, 100};

struct GridEval {
    TrainConfig config;
    double val_accuracy = 0.0;
};

struct GridSearchResult {
    TrainConfig best;
    std::vector<GridEval> evaluated; // all grid points, in enumeration order
};

// Evaluates every grid combination on a seeded stratified 80/20 split of the
// dataset (same split for all configurations) and returns the configuration
// with the best validation accuracy. Ties break toward lower learning rate,
// then lower weight decay, then lower batch size, then shuffle off.
GridSearchResult grid_search(const Dataset& dataset, const std::vector<int>& hidden_sizes,
                             const TrainConfig& base, uint64_t seed = 0);

// Logistic-regression baseline: single linear layer + sigmoid, trained by
// full-batch gradient descent with backtracking line search on
// BCE + 0.5*l2*||w||^2 (bias unpenalized).
struct LogisticModel {
    std::vector<double> w;
    double bias = 0.0;
};

LogisticModel logistic_train(const Dataset& dataset, double l2, int max_iters = 5000,
                             double grad_tol = 1e-8);
double logistic_predict(const LogisticModel& model, const EmbeddingVector& x);
// L2 norm of the regularized-loss gradient at `model`; convergence probe.
double logistic_grad_norm(const LogisticModel& model, const Dataset& dataset, double l2);
Metrics logistic_kfold(const Dataset& dataset, double l2, int k = 5, uint64_t seed = 0);

} // namespace wmbench
