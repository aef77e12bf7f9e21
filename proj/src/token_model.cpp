#include "wmbench/token_model.hpp"

#include <cmath>
#include <stdexcept>

namespace wmbench {

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
    for (const auto& t : tokens) add(t);
}

TokenId Vocabulary::add(const std::string& token) {
    auto it = ids_.find(token);
    if (it != ids_.end()) return it->second;
    const TokenId id = static_cast<TokenId>(tokens_.size());
    tokens_.push_back(token);
    ids_.emplace(token, id);
    return id;
}

TokenId Vocabulary::id_of(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? TokenId{-1} : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
    if (id < 0 || id >= size()) throw std::invalid_argument("token id out of range");
    return tokens_[static_cast<size_t>(id)];
}

TokenSequence Vocabulary::encode(const std::vector<std::string>& words) const {
    TokenSequence out;
    out.reserve(words.size());
    for (const auto& w : words) {
        const TokenId id = id_of(w);
        if (id < 0) throw std::invalid_argument("unknown token: " + w);
        out.push_back(id);
    }
    return out;
}

std::vector<std::string> Vocabulary::decode(const TokenSequence& ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (TokenId id : ids) out.push_back(token(id));
    return out;
}

void Distribution::validate() const {
    double sum = 0.0;
    for (double p : probs) {
        if (!std::isfinite(p) || p < 0.0) {
            throw std::invalid_argument("distribution entry not a finite non-negative value");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("distribution does not sum to 1");
    }
}

Distribution apply_temperature(const Distribution& dist, double temperature) {
    if (temperature <= 0.0) throw std::invalid_argument("temperature must be positive");
    if (temperature == 1.0) return dist;
    Distribution out;
    out.probs.resize(dist.probs.size());
    double sum = 0.0;
    for (size_t i = 0; i < dist.probs.size(); ++i) {
        const double p = dist.probs[i] > 0.0 ? std::pow(dist.probs[i], 1.0 / temperature) : 0.0;
        out.probs[i] = p;
        sum += p;
    }
    if (sum <= 0.0) throw std::invalid_argument("temperature produced a degenerate distribution");
    for (double& p : out.probs) p /= sum;
    return out;
}

NGramModel::NGramModel(Vocabulary vocab, int order, double alpha)
    : vocab_(std::move(vocab)), order_(order), alpha_(alpha) {
    if (order_ < 1) throw std::invalid_argument("order must be >= 1");
    if (alpha_ <= 0.0) throw std::invalid_argument("alpha must be positive");
    if (vocab_.size() < 1) throw std::invalid_argument("vocabulary is empty");
}

void NGramModel::observe(const TokenSequence& context, TokenId next) {
    auto& slot = counts_[context];
    slot.counts[next] += 1;
    slot.total += 1;
}

Distribution NGramModel::next_distribution(const TokenSequence& context) const {
    for (TokenId id : context) {
        if (id < 0 || id >= vocab_.size()) {
            throw std::invalid_argument("context token id out of vocabulary");
        }
    }
    const size_t window = static_cast<size_t>(order_ - 1);
    TokenSequence key;
    if (context.size() >= window) {
        key.assign(context.end() - static_cast<ptrdiff_t>(window), context.end());
    } else {
        key = context; // shorter-than-window contexts fall back to smoothing mass
    }

    const int v = vocab_.size();
    Distribution dist;
    dist.probs.assign(static_cast<size_t>(v), 0.0);
    const auto it = counts_.find(key);
    const int64_t total = it != counts_.end() ? it->second.total : 0;
    const double denom = static_cast<double>(total) + alpha_ * v;
    for (int i = 0; i < v; ++i) dist.probs[static_cast<size_t>(i)] = alpha_ / denom;
    if (it != counts_.end()) {
        for (const auto& [tok, cnt] : it->second.counts) {
            dist.probs[static_cast<size_t>(tok)] = (static_cast<double>(cnt) + alpha_) / denom;
        }
    }
    return dist;
}

NGramModel train_ngram(const std::vector<std::vector<std::string>>& corpus, int order,
                       double alpha) {
    if (corpus.empty()) throw std::invalid_argument("corpus is empty");
    if (order < 1) throw std::invalid_argument("order must be >= 1");
    if (alpha <= 0.0) throw std::invalid_argument("alpha must be positive");

    Vocabulary vocab;
    bool any_token = false;
    for (const auto& seq : corpus) {
        for (const auto& tok : seq) {
            vocab.add(tok);
            any_token = true;
        }
    }
    if (!any_token) throw std::invalid_argument("corpus contains no tokens");

    NGramModel model(std::move(vocab), order, alpha);
    const size_t window = static_cast<size_t>(order - 1);
    for (const auto& seq : corpus) {
        TokenSequence ids = model.vocab().encode(seq);
        for (size_t i = window; i < ids.size(); ++i) {
            TokenSequence ctx(ids.begin() + static_cast<ptrdiff_t>(i - window),
                              ids.begin() + static_cast<ptrdiff_t>(i));
            model.observe(ctx, ids[i]);
        }
    }
    return model;
}

TokenId sample(const Distribution& dist, Rng& rng) {
    double sum = 0.0;
    for (double p : dist.probs) {
        if (!std::isfinite(p) || p < 0.0) throw std::invalid_argument("invalid probability");
        sum += p;
    }
    if (sum <= 0.0) throw std::invalid_argument("degenerate distribution");
    const double u = rng.next_unit() * sum;
    double acc = 0.0;
    for (size_t i = 0; i < dist.probs.size(); ++i) {
        acc += dist.probs[i];
        if (u < acc) return static_cast<TokenId>(i);
    }
    // fp shortfall: return the last token with positive mass
    for (size_t i = dist.probs.size(); i-- > 0;) {
        if (dist.probs[i] > 0.0) return static_cast<TokenId>(i);
    }
    throw std::invalid_argument("degenerate distribution");
}

StepSampler plain_sampler(double temperature) {
    return [temperature](const TokenModel& model, const TokenSequence& context, Rng& rng) {
        const Distribution dist = apply_temperature(model.next_distribution(context), temperature);
        return sample(dist, rng);
    };
}

TokenSequence generate(const TokenModel& model, const TokenSequence& prompt, int length,
                       const StepSampler& sampler, Rng& rng) {
    if (length < 1) throw std::invalid_argument("length must be >= 1");
    TokenSequence context = prompt;
    TokenSequence out;
    out.reserve(static_cast<size_t>(length));
    for (int i = 0; i < length; ++i) {
        const TokenId next = sampler(model, context, rng);
        context.push_back(next);
        out.push_back(next);
    }
    return out;
}

} // namespace wmbench
