#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wmbench/token_model.hpp"

namespace wmbench {

enum class HashScheme { SelfHash, LeftHash };

// Green-list soft watermark parameters. Defaults follow the fixed operating
// point (gamma, delta) = (0.25, 4.0) with a 4-token hashing window.
struct SoftWatermarkConfig {
    double gamma = 0.25;       // green fraction of the vocabulary, in (0,1)
    double delta = 4.0;        // logit bias applied to green tokens, >= 0
    uint64_t key = 0;          // 64-bit secret
    int context_width = 4;     // h: tokens of context entering the PRF
    HashScheme scheme = HashScheme::SelfHash;
    bool dedupe_contexts = false; // score repeated (window, candidate) pairs once

    void validate() const; // throws std::invalid_argument on bad parameters
};

// PRF membership test: is `candidate` on the green list for this context?
// SelfHash seeds the PRF with (key, min id of the context window, candidate);
// LeftHash seeds it with (key, ordered window hash) and queries the candidate.
// Total and deterministic for candidates inside the vocabulary.
bool is_green(const SoftWatermarkConfig& config, const TokenSequence& context, TokenId candidate);

// Per-candidate green membership over the whole vocabulary.
std::vector<uint8_t> green_mask(const SoftWatermarkConfig& config, const TokenSequence& context,
                                int vocab_size);

// Adds delta to green logits, leaves red logits unchanged. Throws on NaN.
std::vector<double> apply_bias(const std::vector<double>& logits,
                               const std::vector<uint8_t>& mask, double delta);

// One watermarked sampling step: softmax(apply_bias(log p, mask, delta)).
// Under SelfHash every candidate is scored with its own membership.
TokenId watermarked_sample(const TokenModel& model, const TokenSequence& context,
                           const SoftWatermarkConfig& config, Rng& rng,
                           double temperature = 1.0);

// StepSampler wrapper for generate().
StepSampler soft_watermark_sampler(const SoftWatermarkConfig& config, double temperature = 1.0);

// z-test outcome for one token sequence.
struct DetectionReport {
    int64_t T = 0;           // scored token count
    int64_t green_count = 0;
    double z = 0.0;
    double p_value = 1.0;    // one-sided normal tail
    double threshold = 4.0;  // z threshold used for the detected() call

    bool detected() const { return z >= threshold; }
};

// Green-count z-test over `tokens`. The first h tokens are unscored (no full
// context window); throws if fewer than h+1 tokens are supplied.
// z = (green_count - gamma*T) / sqrt(T*gamma*(1-gamma)).
DetectionReport detect_z(const TokenSequence& tokens, const SoftWatermarkConfig& config,
                         double z_threshold = 4.0);

// Short non-reversible identifier for a key; reports never carry key material.
std::string key_id(uint64_t key);

// One-sided upper tail of the standard normal, P(Z > z).
double normal_upper_tail(double z);

} // namespace wmbench
