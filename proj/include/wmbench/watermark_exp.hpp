#pragma once

#include <cstdint>
#include <vector>

#include "wmbench/token_model.hpp"

namespace wmbench {

// The n x |V| matrix of uniform(0,1) reals driving exponential-minimum
// sampling. Entries are a pure function of (key, row, token id), so the
// matrix never needs to be materialized; generation index maps into rows
// cyclically. Entries are clamped away from {0,1} before any log is taken.
class KeySequence {
public:
    static constexpr double kXiMin = 1e-12;

    KeySequence(uint64_t key, int n, int vocab_size);

    uint64_t key() const { return key_; }
    int n() const { return n_; }
    int vocab_size() const { return vocab_size_; }

    // Entry in (0,1); row in [0,n), token in [0,vocab_size).
    double xi(int row, TokenId token) const;

    // Full row as a vector over the vocabulary.
    std::vector<double> row(int row) const;

private:
    uint64_t key_;
    uint64_t stream_; // avalanche(key ^ stream constant)
    int n_;
    int vocab_size_;
};

// Throws on n < 1 or vocab_size < 2.
KeySequence key_sequence(uint64_t key, int n, int vocab_size);

// Exponential minimum sampling: argmax_k xi_row[k]^(1/p_k), computed as
// argmin_k -log(xi_row[k]) / p_k. Tokens with p_k = 0 are never selected;
// throws if every p_k is 0. Ties resolve to the lowest token id.
TokenId exp_sample(const Distribution& dist, const std::vector<double>& xi_row);

// Watermarked generation: token i is drawn with xi row (start_offset+i) mod n.
// Fully deterministic given (model, prompt, length, keyseq, start_offset).
TokenSequence generate_watermarked(const TokenModel& model, const TokenSequence& prompt,
                                   int length, const KeySequence& keyseq, int start_offset = 0,
                                   double temperature = 1.0);

// Minimum-cost monotone alignment between `tokens` and the key sequence.
// Substitution cost for token y_i against row j is log(1 - xi_j[y_i]), so
// watermark-favored entries (xi near 1) contribute strongly negative cost;
// insertions and deletions cost +edit_penalty each. The key is cyclic: the
// returned value is the minimum over all n starting offsets of the global
// alignment against the rotated row sequence. Throws on empty input.
double alignment_cost(const TokenSequence& tokens, const KeySequence& keyseq,
                      double edit_penalty);

struct AlignmentReport {
    double observed_cost = 0.0;
    std::vector<double> null_costs; // one per resampled key
    double p_value = 1.0;           // (1 + #{null <= observed}) / (1 + n_resamples)
    int n_resamples = 0;
};

// Permutation test: compares the observed alignment cost against costs under
// fresh random key sequences of the same shape. Requires n_resamples >= 99.
// Resamples derive from `null_seed` and are computed in parallel when
// `threads` > 1 (0 = hardware concurrency); results do not depend on the
// thread count.
AlignmentReport detect_permutation(const TokenSequence& tokens, const KeySequence& keyseq,
                                   int n_resamples, double edit_penalty,
                                   uint64_t null_seed = 0x7c3f9a15d2e8b641ULL, int threads = 0);

} // namespace wmbench
