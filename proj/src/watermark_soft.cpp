#include "wmbench/watermark_soft.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace wmbench {

namespace {

constexpr uint64_t kSelfHashStream = 0x8f0c2b4de6a19375ULL;
constexpr uint64_t kLeftHashStream = 0x3d6e8a51c97b20f4ULL;
constexpr uint64_t kCandidateStream = 0xa51e672bd4c8391fULL;

// Window aggregate feeding the PRF. SelfHash collapses the window to its
// minimum token id (the candidate enters the seed separately); LeftHash folds
// the window ids in order.
uint64_t window_aggregate(const SoftWatermarkConfig& config, const TokenSequence& context) {
    const size_t h = static_cast<size_t>(config.context_width);
    const size_t start = context.size() > h ? context.size() - h : 0;
    if (config.scheme == HashScheme::SelfHash) {
        uint64_t min_id = 0xffffffffffffffffULL; // empty-window sentinel
        for (size_t i = start; i < context.size(); ++i) {
            min_id = std::min(min_id, static_cast<uint64_t>(static_cast<uint32_t>(context[i])));
        }
        return mix2(kSelfHashStream, min_id);
    }
    uint64_t agg = kLeftHashStream;
    for (size_t i = start; i < context.size(); ++i) {
        agg = mix2(agg, static_cast<uint64_t>(static_cast<uint32_t>(context[i])));
    }
    return agg;
}

uint64_t green_prf(const SoftWatermarkConfig& config, uint64_t window_agg, TokenId candidate) {
    const uint64_t cand = mix2(kCandidateStream, static_cast<uint64_t>(static_cast<uint32_t>(candidate)));
    return avalanche(config.key ^ avalanche(window_agg + kGolden) ^ cand);
}

} // namespace

void SoftWatermarkConfig::validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in (0,1)");
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw std::invalid_argument("delta must be >= 0");
    if (context_width < 1) throw std::invalid_argument("context_width must be >= 1");
}

bool is_green(const SoftWatermarkConfig& config, const TokenSequence& context, TokenId candidate) {
    return u64_to_unit(green_prf(config, window_aggregate(config, context), candidate)) <
           config.gamma;
}

std::vector<uint8_t> green_mask(const SoftWatermarkConfig& config, const TokenSequence& context,
                                int vocab_size) {
    const uint64_t agg = window_aggregate(config, context);
    std::vector<uint8_t> mask(static_cast<size_t>(vocab_size), 0);
    for (int c = 0; c < vocab_size; ++c) {
        mask[static_cast<size_t>(c)] =
            u64_to_unit(green_prf(config, agg, static_cast<TokenId>(c))) < config.gamma ? 1 : 0;
    }
    return mask;
}

std::vector<double> apply_bias(const std::vector<double>& logits,
                               const std::vector<uint8_t>& mask, double delta) {
    if (mask.size() != logits.size()) throw std::invalid_argument("mask/logit size mismatch");
    std::vector<double> out(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) {
        if (std::isnan(logits[i])) throw std::invalid_argument("NaN logit");
        out[i] = logits[i] + (mask[i] ? delta : 0.0);
    }
    return out;
}

TokenId watermarked_sample(const TokenModel& model, const TokenSequence& context,
                           const SoftWatermarkConfig& config, Rng& rng, double temperature) {
    config.validate();
    const Distribution dist = apply_temperature(model.next_distribution(context), temperature);
    const int v = dist.size();

    std::vector<double> logits(static_cast<size_t>(v));
    for (int i = 0; i < v; ++i) {
        const double p = dist.probs[static_cast<size_t>(i)];
        logits[static_cast<size_t>(i)] = p > 0.0 ? std::log(p) : -1e300;
    }
    const std::vector<uint8_t> mask = green_mask(config, context, v);
    const std::vector<double> biased = apply_bias(logits, mask, config.delta);

    double max_logit = -1e300;
    for (double l : biased) max_logit = std::max(max_logit, l);
    Distribution softened;
    softened.probs.resize(static_cast<size_t>(v));
    double sum = 0.0;
    for (int i = 0; i < v; ++i) {
        const double e = biased[static_cast<size_t>(i)] > -1e299
                             ? std::exp(biased[static_cast<size_t>(i)] - max_logit)
                             : 0.0;
        softened.probs[static_cast<size_t>(i)] = e;
        sum += e;
    }
    for (double& p : softened.probs) p /= sum;
    return sample(softened, rng);
}

StepSampler soft_watermark_sampler(const SoftWatermarkConfig& config, double temperature) {
    return [config, temperature](const TokenModel& model, const TokenSequence& context, Rng& rng) {
        return watermarked_sample(model, context, config, rng, temperature);
    };
}

double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

DetectionReport detect_z(const TokenSequence& tokens, const SoftWatermarkConfig& config,
                         double z_threshold) {
    config.validate();
    const size_t h = static_cast<size_t>(config.context_width);
    if (tokens.size() < h + 1) {
        throw std::invalid_argument("sequence shorter than context_width + 1");
    }

    int64_t scored = 0;
    int64_t green = 0;
    std::set<TokenSequence> seen; // (window ++ candidate) keys when deduping
    for (size_t i = h; i < tokens.size(); ++i) {
        const TokenSequence window(tokens.begin() + static_cast<ptrdiff_t>(i - h),
                                   tokens.begin() + static_cast<ptrdiff_t>(i));
        if (config.dedupe_contexts) {
            TokenSequence dedupe_key = window;
            dedupe_key.push_back(tokens[i]);
            if (!seen.insert(std::move(dedupe_key)).second) continue;
        }
        ++scored;
        if (is_green(config, window, tokens[i])) ++green;
    }

    DetectionReport report;
    report.T = scored;
    report.green_count = green;
    report.threshold = z_threshold;
    const double t = static_cast<double>(scored);
    report.z = (static_cast<double>(green) - config.gamma * t) /
               std::sqrt(t * config.gamma * (1.0 - config.gamma));
    report.p_value = normal_upper_tail(report.z);
    return report;
}

std::string key_id(uint64_t key) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << avalanche(key ^ 0x1db503a2f6e94c87ULL);
    return os.str();
}

} // namespace wmbench
