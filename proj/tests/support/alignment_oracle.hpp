#pragma once

// Independent oracles for the alignment cost: an explicit enumeration over
// monotone matchings (structurally unrelated to the DP) and a plain
// one-offset-at-a-time reference DP for medium-size cross-checks.

#include <cmath>
#include <limits>
#include <vector>

#include "wmbench/token_model.hpp"
#include "wmbench/watermark_exp.hpp"

namespace testutil {

inline double sub_cost(const wmbench::KeySequence& ks, wmbench::TokenId token, int row) {
    return std::log1p(-ks.xi(row, token));
}

// Minimum cost over all monotone matchings: choose k matched (token, row)
// pairs with strictly increasing indices on both sides; unmatched tokens and
// rows each cost the edit penalty.
inline double enumerate_alignments(const std::vector<std::vector<double>>& cost, double pen) {
    const int m = static_cast<int>(cost.size());
    const int n = m ? static_cast<int>(cost[0].size()) : 0;
    double best = std::numeric_limits<double>::infinity();

    std::vector<int> token_subset, row_subset;
    // enumerate subsets of token indices, then monotone row assignments
    for (int mask = 0; mask < (1 << m); ++mask) {
        token_subset.clear();
        for (int i = 0; i < m; ++i) {
            if (mask & (1 << i)) token_subset.push_back(i);
        }
        const int k = static_cast<int>(token_subset.size());
        if (k > n) continue;

        // recursive choice of k increasing rows
        std::vector<int> rows(static_cast<size_t>(k));
        const double gap_cost = pen * static_cast<double>((m - k) + (n - k));
        auto recurse = [&](auto&& self, int depth, int next_row) -> void {
            if (depth == k) {
                double total = gap_cost;
                for (int t = 0; t < k; ++t) {
                    total += cost[static_cast<size_t>(token_subset[static_cast<size_t>(t)])]
                                 [static_cast<size_t>(rows[static_cast<size_t>(t)])];
                }
                best = std::min(best, total);
                return;
            }
            for (int r = next_row; r <= n - (k - depth); ++r) {
                rows[static_cast<size_t>(depth)] = r;
                self(self, depth + 1, r + 1);
            }
        };
        if (k == 0) {
            best = std::min(best, gap_cost);
        } else {
            recurse(recurse, 0, 0);
        }
    }
    return best;
}

// Brute-force cyclic alignment cost: enumeration oracle minimized over all
// starting offsets, mirroring the library definition.
inline double brute_force_alignment_cost(const wmbench::TokenSequence& tokens,
                                         const wmbench::KeySequence& keyseq, double pen) {
    const int m = static_cast<int>(tokens.size());
    const int n = keyseq.n();
    double best = std::numeric_limits<double>::infinity();
    for (int s = 0; s < n; ++s) {
        std::vector<std::vector<double>> cost(static_cast<size_t>(m),
                                              std::vector<double>(static_cast<size_t>(n)));
        for (int i = 0; i < m; ++i) {
            for (int t = 0; t < n; ++t) {
                cost[static_cast<size_t>(i)][static_cast<size_t>(t)] =
                    sub_cost(keyseq, tokens[static_cast<size_t>(i)], (s + t) % n);
            }
        }
        best = std::min(best, enumerate_alignments(cost, pen));
    }
    return best;
}

// Textbook global Levenshtein DP, one offset at a time.
inline double reference_alignment_cost(const wmbench::TokenSequence& tokens,
                                       const wmbench::KeySequence& keyseq, double pen) {
    const int m = static_cast<int>(tokens.size());
    const int n = keyseq.n();
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> dp(static_cast<size_t>(m + 1),
                                        std::vector<double>(static_cast<size_t>(n + 1)));
    for (int s = 0; s < n; ++s) {
        dp[0][0] = 0.0;
        for (int i = 1; i <= m; ++i) dp[static_cast<size_t>(i)][0] = i * pen;
        for (int j = 1; j <= n; ++j) dp[0][static_cast<size_t>(j)] = j * pen;
        for (int i = 1; i <= m; ++i) {
            for (int j = 1; j <= n; ++j) {
                const double c =
                    sub_cost(keyseq, tokens[static_cast<size_t>(i - 1)], (s + j - 1) % n);
                dp[static_cast<size_t>(i)][static_cast<size_t>(j)] =
                    std::min({dp[static_cast<size_t>(i - 1)][static_cast<size_t>(j - 1)] + c,
                              dp[static_cast<size_t>(i - 1)][static_cast<size_t>(j)] + pen,
                              dp[static_cast<size_t>(i)][static_cast<size_t>(j - 1)] + pen});
            }
        }
        best = std::min(best, dp[static_cast<size_t>(m)][static_cast<size_t>(n)]);
    }
    return best;
}

} // namespace testutil
