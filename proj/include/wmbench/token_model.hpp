#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "wmbench/hash.hpp"

namespace wmbench {

using TokenId = int32_t;
using TokenSequence = std::vector<TokenId>;

// Ordered token universe. Ids are dense 0..size-1 in insertion order and
// stable for the lifetime of the vocabulary.
class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(const std::vector<std::string>& tokens);

    // Returns the id of `token`, inserting it if new.
    TokenId add(const std::string& token);
    // Returns the id of `token`, or -1 if absent.
    TokenId id_of(const std::string& token) const;
    const std::string& token(TokenId id) const;
    int size() const { return static_cast<int>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    TokenSequence encode(const std::vector<std::string>& words) const; // throws on unknown word
    std::vector<std::string> decode(const TokenSequence& ids) const;

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> ids_;
};

// Next-token probability vector over the full vocabulary.
struct Distribution {
    std::vector<double> probs;

    int size() const { return static_cast<int>(probs.size()); }
    // Throws std::invalid_argument unless entries are finite, non-negative and
    // sum to 1 within 1e-9.
    void validate() const;
};

// Temperature-adjusted copy: p_i^(1/T) renormalized. T=1 returns the input.
Distribution apply_temperature(const Distribution& dist, double temperature);

// Anything that can serve next-token distributions: the built-in n-gram model
// or an external-model adapter. Immutable after construction; safe to read
// from concurrent generation workers.
class TokenModel {
public:
    virtual ~TokenModel() = default;
    virtual const Vocabulary& vocab() const = 0;
    // `context` may be any length; implementations use the suffix they need.
    // Throws std::invalid_argument on token ids outside the vocabulary.
    virtual Distribution next_distribution(const TokenSequence& context) const = 0;
};

// Additive-smoothed n-gram model. Contexts are the (order-1)-token windows
// preceding each position; smoothing guarantees full-support distributions.
class NGramModel : public TokenModel {
public:
    NGramModel(Vocabulary vocab, int order, double alpha);

    const Vocabulary& vocab() const override { return vocab_; }
    int order() const { return order_; }
    double alpha() const { return alpha_; }

    Distribution next_distribution(const TokenSequence& context) const override;

    void observe(const TokenSequence& context, TokenId next);

private:
    Vocabulary vocab_;
    int order_;
    double alpha_;

    struct ContextCounts {
        std::unordered_map<TokenId, int64_t> counts;
        int64_t total = 0;
    };
    std::map<TokenSequence, ContextCounts> counts_;
};

// Trains an order-`order` model with additive smoothing `alpha` on a corpus of
// token sequences. The vocabulary is every distinct token, in first-appearance
// order. Throws on empty corpus, order < 1, or alpha <= 0.
NGramModel train_ngram(const std::vector<std::vector<std::string>>& corpus, int order,
                       double alpha);

// Inverse-CDF draw from `dist`. Throws on a degenerate (all-zero) vector.
TokenId sample(const Distribution& dist, Rng& rng);

// Per-step sampling strategy; the injection point for watermarks.
using StepSampler = std::function<TokenId(const TokenModel&, const TokenSequence& context, Rng&)>;

// Plain (unwatermarked) sampling at the given temperature.
StepSampler plain_sampler(double temperature = 1.0);

// Draws exactly `length` new tokens after `prompt` using `sampler`.
// Returns only the new tokens. Throws on length < 1.
TokenSequence generate(const TokenModel& model, const TokenSequence& prompt, int length,
                       const StepSampler& sampler, Rng& rng);

} // namespace wmbench
