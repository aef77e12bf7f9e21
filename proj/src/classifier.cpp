#include "wmbench/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "wmbench/hash.hpp"

namespace wmbench {

double auc_score(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw std::invalid_argument("scores/labels size mismatch");
    }
    const long npos = std::count(labels.begin(), labels.end(), 1);
    const long nneg = static_cast<long>(labels.size()) - npos;
    if (npos == 0 || nneg == 0) throw std::invalid_argument("AUC needs both classes");

    std::vector<size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // average ranks within tied score groups
    double pos_rank_sum = 0.0;
    size_t i = 0;
    while (i < idx.size()) {
        size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (size_t k = i; k <= j; ++k) {
            if (labels[idx[k]] == 1) pos_rank_sum += avg_rank;
        }
        i = j + 1;
    }
    const double u = pos_rank_sum - static_cast<double>(npos) * (npos + 1) / 2.0;
    return u / (static_cast<double>(npos) * static_cast<double>(nneg));
}

Metrics metrics_from_scores(const std::vector<double>& scores, const std::vector<int>& labels) {
    Metrics m;
    for (size_t i = 0; i < scores.size(); ++i) {
        const bool pred_watermarked = scores[i] >= 0.5;
        if (labels[i] == 1) {
            pred_watermarked ? ++m.tp : ++m.fn;
        } else {
            pred_watermarked ? ++m.fp : ++m.tn;
        }
    }
    const long n = m.tp + m.tn + m.fp + m.fn;
    m.accuracy = n ? static_cast<double>(m.tp + m.tn) / n : 0.0;
    m.false_unwatermarked_rate = (m.tp + m.fn) ? static_cast<double>(m.fn) / (m.tp + m.fn) : 0.0;
    m.false_watermarked_rate = (m.fp + m.tn) ? static_cast<double>(m.fp) / (m.fp + m.tn) : 0.0;
    m.auc = auc_score(scores, labels);
    return m;
}

FoldSplit make_folds(size_t n, int k, uint64_t seed) {
    if (k < 2) throw std::invalid_argument("k must be >= 2");
    if (static_cast<size_t>(k) > n) throw std::invalid_argument("k exceeds dataset size");
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng(mix2(seed, 0xf01dULL));
    for (size_t i = n; i > 1; --i) {
        const size_t j = rng.next_below(i);
        std::swap(order[i - 1], order[j]);
    }

    FoldSplit split;
    split.k = k;
    split.seed = seed;
    split.fold_indices.resize(static_cast<size_t>(k));
    const size_t base = n / static_cast<size_t>(k);
    const size_t extra = n % static_cast<size_t>(k);
    size_t pos = 0;
    for (int f = 0; f < k; ++f) {
        const size_t len = base + (static_cast<size_t>(f) < extra ? 1 : 0);
        auto& fold = split.fold_indices[static_cast<size_t>(f)];
        fold.assign(order.begin() + static_cast<ptrdiff_t>(pos),
                    order.begin() + static_cast<ptrdiff_t>(pos + len));
        pos += len;
    }
    return split;
}

namespace {

template <typename TrainFn, typename PredictFn>
Metrics kfold_impl(const Dataset& dataset, int k, uint64_t seed, TrainFn train_fold,
                   PredictFn predict) {
    if (!dataset.has_both_classes()) throw std::invalid_argument("dataset must contain both classes");
    const FoldSplit split = make_folds(dataset.size(), k, seed);

    std::vector<double> pooled_scores;
    std::vector<int> pooled_labels;
    std::vector<FoldMetrics> fold_metrics;

    for (int f = 0; f < k; ++f) {
        Dataset train;
        for (int g = 0; g < k; ++g) {
            if (g == f) continue;
            for (size_t idx : split.fold_indices[static_cast<size_t>(g)]) {
                train.x.push_back(dataset.x[idx]);
                train.y.push_back(dataset.y[idx]);
            }
        }
        auto model = train_fold(train, f);

        std::vector<double> scores;
        std::vector<int> labels;
        for (size_t idx : split.fold_indices[static_cast<size_t>(f)]) {
            scores.push_back(predict(model, dataset.x[idx]));
            labels.push_back(dataset.y[idx]);
        }
        FoldMetrics fm;
        fm.fold = f;
        fm.n_test = static_cast<long>(scores.size());
        long correct = 0, tp = 0, fn = 0, fp = 0, tn = 0;
        for (size_t i = 0; i < scores.size(); ++i) {
            const bool pred = scores[i] >= 0.5;
            if (pred == (labels[i] == 1)) ++correct;
            if (labels[i] == 1) {
                pred ? ++tp : ++fn;
            } else {
                pred ? ++fp : ++tn;
            }
        }
        fm.accuracy = scores.empty() ? 0.0 : static_cast<double>(correct) / scores.size();
        fm.false_unwatermarked_rate = (tp + fn) ? static_cast<double>(fn) / (tp + fn) : 0.0;
        fm.false_watermarked_rate = (fp + tn) ? static_cast<double>(fp) / (fp + tn) : 0.0;
        const bool both = std::count(labels.begin(), labels.end(), 1) > 0 &&
                          std::count(labels.begin(), labels.end(), 0) > 0;
        fm.auc = both ? auc_score(scores, labels) : 0.5;
        fold_metrics.push_back(fm);

        pooled_scores.insert(pooled_scores.end(), scores.begin(), scores.end());
        pooled_labels.insert(pooled_labels.end(), labels.begin(), labels.end());
    }

    Metrics m = metrics_from_scores(pooled_scores, pooled_labels);
    m.folds = std::move(fold_metrics);
    return m;
}

} // namespace

Metrics kfold_evaluate(const Dataset& dataset, const std::vector<int>& hidden_sizes,
                       const TrainConfig& config, int k, uint64_t seed) {
    return kfold_impl(
        dataset, k, seed,
        [&](const Dataset& train, int fold) {
            std::vector<int> sizes;
            sizes.push_back(train.dim());
            sizes.insert(sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
            sizes.push_back(1);
            TrainConfig fold_config = config;
            fold_config.seed = mix3(config.seed, 0xf01dULL, static_cast<uint64_t>(fold));
            return train_mlp(MLPParams::init(sizes, fold_config.seed), train, fold_config).params;
        },
        [](const MLPParams& model, const EmbeddingVector& x) { return mlp_forward(model, x); });
}

namespace {

// Seeded stratified 80/20 split: per class, shuffle then hold out the last
// 20% (at least one sample) for validation.
void stratified_split(const Dataset& dataset, uint64_t seed, Dataset& train, Dataset& val) {
    for (int cls = 0; cls <= 1; ++cls) {
        std::vector<size_t> members;
        for (size_t i = 0; i < dataset.size(); ++i) {
            if (dataset.y[i] == cls) members.push_back(i);
        }
        Rng rng(mix3(seed, 0x591717ULL, static_cast<uint64_t>(cls)));
        for (size_t i = members.size(); i > 1; --i) {
            const size_t j = rng.next_below(i);
            std::swap(members[i - 1], members[j]);
        }
        const size_t n_val = std::max<size_t>(1, members.size() / 5);
        for (size_t i = 0; i < members.size(); ++i) {
            Dataset& dst = i + n_val >= members.size() ? val : train;
            dst.x.push_back(dataset.x[members[i]]);
            dst.y.push_back(dataset.y[members[i]]);
        }
    }
}

} // namespace

GridSearchResult grid_search(const Dataset& dataset, const std::vector<int>& hidden_sizes,
                             const TrainConfig& base, uint64_t seed) {
    if (dataset.size() < 10) throw std::invalid_argument("dataset too small for a grid search");
    if (!dataset.has_both_classes()) throw std::invalid_argument("dataset must contain both classes");

    Dataset train, val;
    stratified_split(dataset, seed, train, val);

    std::vector<int> sizes;
    sizes.push_back(dataset.dim());
    sizes.insert(sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
    sizes.push_back(1);

    GridSearchResult result;
    double best_acc = -1.0;
    // enumeration order doubles as the tie-break order
    for (double lr : kGridLearningRates) {
        for (double wd : kGridWeightDecays) {
            for (int batch : kGridBatchSizes) {
                for (bool shuffle : {false, true}) {
                    TrainConfig cfg = base;
                    cfg.learning_rate = lr;
                    cfg.weight_decay = wd;
                    cfg.batch_size = batch;
                    cfg.shuffle = shuffle;
                    cfg.seed = mix2(seed, 0x6e1dULL);
                    const TrainResult trained =
                        train_mlp(MLPParams::init(sizes, cfg.seed), train, cfg);

                    long correct = 0;
                    for (size_t i = 0; i < val.size(); ++i) {
                        const bool pred = mlp_forward(trained.params, val.x[i]) >= 0.5;
                        if (pred == (val.y[i] == 1)) ++correct;
                    }
                    GridEval eval;
                    eval.config = cfg;
                    eval.val_accuracy = static_cast<double>(correct) / val.size();
                    if (eval.val_accuracy > best_acc) {
                        best_acc = eval.val_accuracy;
                        result.best = cfg;
                    }
                    result.evaluated.push_back(std::move(eval));
                }
            }
        }
    }
    return result;
}

namespace {

double logistic_raw(const LogisticModel& m, const EmbeddingVector& x) {
    double z = m.bias;
    for (size_t i = 0; i < m.w.size(); ++i) z += m.w[i] * x[i];
    return z;
}

double logistic_loss(const LogisticModel& m, const Dataset& d, double l2) {
    double loss = 0.0;
    for (size_t s = 0; s < d.size(); ++s) {
        const double z = logistic_raw(m, d.x[s]);
        // numerically stable BCE on the raw logit
        loss += std::max(z, 0.0) - z * d.y[s] + std::log1p(std::exp(-std::abs(z)));
    }
    loss /= static_cast<double>(d.size());
    double reg = 0.0;
    for (double w : m.w) reg += w * w;
    return loss + 0.5 * l2 * reg;
}

void logistic_grad(const LogisticModel& m, const Dataset& d, double l2,
                   std::vector<double>& gw, double& gb) {
    gw.assign(m.w.size(), 0.0);
    gb = 0.0;
    const double scale = 1.0 / static_cast<double>(d.size());
    for (size_t s = 0; s < d.size(); ++s) {
        const double p = 1.0 / (1.0 + std::exp(-logistic_raw(m, d.x[s])));
        const double err = (p - static_cast<double>(d.y[s])) * scale;
        for (size_t i = 0; i < m.w.size(); ++i) gw[i] += err * d.x[s][i];
        gb += err;
    }
    for (size_t i = 0; i < m.w.size(); ++i) gw[i] += l2 * m.w[i];
}

} // namespace

LogisticModel logistic_train(const Dataset& dataset, double l2, int max_iters, double grad_tol) {
    if (dataset.size() == 0) throw std::invalid_argument("empty dataset");
    if (!dataset.has_both_classes()) throw std::invalid_argument("dataset must contain both classes");

    LogisticModel model;
    model.w.assign(static_cast<size_t>(dataset.dim()), 0.0);

    std::vector<double> gw;
    double gb = 0.0;
    double step = 1.0;
    for (int iter = 0; iter < max_iters; ++iter) {
        logistic_grad(model, dataset, l2, gw, gb);
        double gnorm2 = gb * gb;
        for (double g : gw) gnorm2 += g * g;
        if (std::sqrt(gnorm2) < grad_tol) break;

        const double loss = logistic_loss(model, dataset, l2);
        step = std::min(step * 2.0, 1e6);
        while (true) {
            LogisticModel trial = model;
            for (size_t i = 0; i < trial.w.size(); ++i) trial.w[i] -= step * gw[i];
            trial.bias -= step * gb;
            if (logistic_loss(trial, dataset, l2) <= loss - 0.5 * step * gnorm2 || step < 1e-16) {
                model = std::move(trial);
                break;
            }
            step *= 0.5;
        }
    }
    return model;
}

double logistic_predict(const LogisticModel& model, const EmbeddingVector& x) {
    if (x.size() != model.w.size()) throw std::invalid_argument("input dimension mismatch");
    return 1.0 / (1.0 + std::exp(-logistic_raw(model, x)));
}

double logistic_grad_norm(const LogisticModel& model, const Dataset& dataset, double l2) {
    std::vector<double> gw;
    double gb = 0.0;
    logistic_grad(model, dataset, l2, gw, gb);
    double gnorm2 = gb * gb;
    for (double g : gw) gnorm2 += g * g;
    return std::sqrt(gnorm2);
}

Metrics logistic_kfold(const Dataset& dataset, double l2, int k, uint64_t seed) {
    return kfold_impl(
        dataset, k, seed,
        [&](const Dataset& train, int) { return logistic_train(train, l2); },
        [](const LogisticModel& model, const EmbeddingVector& x) {
            return logistic_predict(model, x);
        });
}

} // namespace wmbench
