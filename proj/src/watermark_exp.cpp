#include "wmbench/watermark_exp.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>
#include <thread>

namespace wmbench {

namespace {
constexpr uint64_t kXiStream = 0xd4aefb1c38527e09ULL;
constexpr uint64_t kNullKeyStream = 0x51b3e7f02a9c6d84ULL;
} // namespace

KeySequence::KeySequence(uint64_t key, int n, int vocab_size)
    : key_(key), stream_(avalanche(key ^ kXiStream)), n_(n), vocab_size_(vocab_size) {
    if (n_ < 1) throw std::invalid_argument("key sequence length must be >= 1");
    if (vocab_size_ < 2) throw std::invalid_argument("vocab size must be >= 2");
}

double KeySequence::xi(int row, TokenId token) const {
    const double u = u64_to_unit(mix3(stream_, static_cast<uint64_t>(row),
                                      static_cast<uint64_t>(static_cast<uint32_t>(token))));
    return std::clamp(u, kXiMin, 1.0 - kXiMin);
}

std::vector<double> KeySequence::row(int row) const {
    std::vector<double> out(static_cast<size_t>(vocab_size_));
    for (int v = 0; v < vocab_size_; ++v) out[static_cast<size_t>(v)] = xi(row, v);
    return out;
}

KeySequence key_sequence(uint64_t key, int n, int vocab_size) {
    return KeySequence(key, n, vocab_size);
}

TokenId exp_sample(const Distribution& dist, const std::vector<double>& xi_row) {
    if (xi_row.size() != dist.probs.size()) {
        throw std::invalid_argument("xi row size does not match distribution");
    }
    TokenId best = -1;
    double best_score = 0.0;
    for (size_t k = 0; k < dist.probs.size(); ++k) {
        const double p = dist.probs[k];
        if (p <= 0.0) continue;
        const double score = -std::log(xi_row[k]) / p;
        if (best < 0 || score < best_score) {
            best = static_cast<TokenId>(k);
            best_score = score;
        }
    }
    if (best < 0) throw std::invalid_argument("all token probabilities are zero");
    return best;
}

TokenSequence generate_watermarked(const TokenModel& model, const TokenSequence& prompt,
                                   int length, const KeySequence& keyseq, int start_offset,
                                   double temperature) {
    if (length < 1) throw std::invalid_argument("length must be >= 1");
    if (model.vocab().size() != keyseq.vocab_size()) {
        throw std::invalid_argument("key sequence vocab size does not match model");
    }
    const int n = keyseq.n();
    int offset = ((start_offset % n) + n) % n;
    TokenSequence context = prompt;
    TokenSequence out;
    out.reserve(static_cast<size_t>(length));
    for (int i = 0; i < length; ++i) {
        const Distribution dist =
            apply_temperature(model.next_distribution(context), temperature);
        const TokenId next = exp_sample(dist, keyseq.row((offset + i) % n));
        context.push_back(next);
        out.push_back(next);
    }
    return out;
}

namespace {

// Global Levenshtein-style DP for a band of `group` consecutive offsets at
// once. States are interleaved [t][g] so the inner loop is unit-stride; the
// cost matrix is doubled along the key axis so every offset reads contiguous
// memory. Identical recurrence to the one-offset-at-a-time formulation.
void align_offset_group(const std::vector<double>& cost, int m, int n, int s0, int group,
                        double pen, std::vector<double>& prev, std::vector<double>& cur,
                        double* results) {
    const int stride = 2 * n;
    for (int t = 0; t <= n; ++t) {
        for (int g = 0; g < group; ++g) prev[static_cast<size_t>(t * group + g)] = t == 0 ? 0.0 : t * pen;
    }
    for (int i = 1; i <= m; ++i) {
        const double* crow = cost.data() + static_cast<size_t>(i - 1) * stride + s0;
        for (int g = 0; g < group; ++g) cur[static_cast<size_t>(g)] = i * pen;
        for (int t = 1; t <= n; ++t) {
            const double* c = crow + (t - 1);
            double* out = cur.data() + static_cast<size_t>(t) * group;
            const double* diag = prev.data() + static_cast<size_t>(t - 1) * group;
            const double* up = prev.data() + static_cast<size_t>(t) * group;
            const double* left = cur.data() + static_cast<size_t>(t - 1) * group;
            for (int g = 0; g < group; ++g) {
                const double a = diag[g] + c[g];
                const double b = up[g] + pen;
                const double d = left[g] + pen;
                out[g] = std::min(std::min(a, b), d);
            }
        }
        std::swap(prev, cur);
    }
    for (int g = 0; g < group; ++g) results[g] = prev[static_cast<size_t>(n) * group + g];
}

double min_cost_over_offsets(const std::vector<double>& cost, int m, int n, double pen) {
    constexpr int kGroup = 8;
    std::vector<double> prev(static_cast<size_t>(n + 1) * kGroup);
    std::vector<double> cur(static_cast<size_t>(n + 1) * kGroup);
    double results[kGroup];
    double best = std::numeric_limits<double>::infinity();
    for (int s0 = 0; s0 < n; s0 += kGroup) {
        const int group = std::min(kGroup, n - s0);
        align_offset_group(cost, m, n, s0, group, pen, prev, cur, results);
        for (int g = 0; g < group; ++g) best = std::min(best, results[g]);
    }
    return best;
}

// cost[i][j] = log(1 - xi_{j mod n}[y_i]) laid out with the key axis doubled.
std::vector<double> build_cost_matrix(const TokenSequence& tokens, const KeySequence& keyseq) {
    const int m = static_cast<int>(tokens.size());
    const int n = keyseq.n();
    std::vector<double> cost(static_cast<size_t>(m) * (2 * n));
    for (int i = 0; i < m; ++i) {
        double* row = cost.data() + static_cast<size_t>(i) * (2 * n);
        for (int j = 0; j < n; ++j) {
            const double c = std::log1p(-keyseq.xi(j, tokens[static_cast<size_t>(i)]));
            row[j] = c;
            row[n + j] = c;
        }
    }
    return cost;
}

} // namespace

double alignment_cost(const TokenSequence& tokens, const KeySequence& keyseq,
                      double edit_penalty) {
    if (tokens.empty()) throw std::invalid_argument("token sequence is empty");
    for (TokenId y : tokens) {
        if (y < 0 || y >= keyseq.vocab_size()) {
            throw std::invalid_argument("token id outside key sequence vocabulary");
        }
    }
    const std::vector<double> cost = build_cost_matrix(tokens, keyseq);
    return min_cost_over_offsets(cost, static_cast<int>(tokens.size()), keyseq.n(),
                                 edit_penalty);
}

AlignmentReport detect_permutation(const TokenSequence& tokens, const KeySequence& keyseq,
                                   int n_resamples, double edit_penalty, uint64_t null_seed,
                                   int threads) {
    if (n_resamples < 99) throw std::invalid_argument("n_resamples must be >= 99");

    AlignmentReport report;
    report.n_resamples = n_resamples;
    report.observed_cost = alignment_cost(tokens, keyseq, edit_penalty);
    report.null_costs.assign(static_cast<size_t>(n_resamples), 0.0);

    int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, n_resamples));

    auto run_chunk = [&](int begin, int end) {
        for (int r = begin; r < end; ++r) {
            const uint64_t null_key = mix3(null_seed, static_cast<uint64_t>(r), kNullKeyStream);
            const KeySequence null_ks(null_key, keyseq.n(), keyseq.vocab_size());
            report.null_costs[static_cast<size_t>(r)] =
                alignment_cost(tokens, null_ks, edit_penalty);
        }
    };

    if (workers == 1) {
        run_chunk(0, n_resamples);
    } else {
        std::vector<std::future<void>> futures;
        const int chunk = (n_resamples + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const int begin = w * chunk;
            const int end = std::min(n_resamples, begin + chunk);
            if (begin >= end) break;
            futures.push_back(std::async(std::launch::async, run_chunk, begin, end));
        }
        for (auto& f : futures) f.get();
    }

    int64_t at_most = 0;
    for (double c : report.null_costs) {
        if (c <= report.observed_cost) ++at_most;
    }
    report.p_value = static_cast<double>(1 + at_most) / static_cast<double>(1 + n_resamples);
    return report;
}

} // namespace wmbench
