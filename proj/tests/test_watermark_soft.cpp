#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "support/test_util.hpp"
#include "wmbench/watermark_soft.hpp"

using namespace wmbench;

namespace {

SoftWatermarkConfig make_config(uint64_t key = 0x5eedULL) {
    SoftWatermarkConfig cfg;
    cfg.key = key;
    return cfg;
}

// Greedily builds a token stream whose detect_z scores exactly
// `green_target` of `scored` positions green. Candidates are searched
// directly with is_green, so the construction is independent of the z math.
TokenSequence sequence_with_green_count(const SoftWatermarkConfig& cfg, int scored,
                                        int green_target, int vocab_size) {
    TokenSequence tokens(static_cast<size_t>(cfg.context_width), 0);
    int remaining_green = green_target;
    for (int i = 0; i < scored; ++i) {
        const bool want_green = remaining_green > 0;
        const TokenSequence window(tokens.end() - cfg.context_width, tokens.end());
        TokenId chosen = -1;
        for (TokenId c = 0; c < vocab_size; ++c) {
            if (is_green(cfg, window, c) == want_green) {
                chosen = c;
                break;
            }
        }
        REQUIRE(chosen >= 0);
        tokens.push_back(chosen);
        if (want_green) --remaining_green;
    }
    return tokens;
}

} // namespace

TEST_CASE("is_green is deterministic and total") {
    const auto cfg = make_config();
    const TokenSequence ctx{3, 1, 4, 1};
    for (TokenId c = 0; c < 50; ++c) {
        CHECK(is_green(cfg, ctx, c) == is_green(cfg, ctx, c));
    }
}

TEST_CASE("green fraction over the vocabulary approximates gamma") {
    // exhaustive enumeration over |V|=1000 for a few contexts
    const auto cfg = make_config(0xabcdef12345ULL);
    for (uint64_t ctx_seed : {1ULL, 2ULL, 3ULL}) {
        const TokenSequence ctx{static_cast<TokenId>(ctx_seed * 7 % 100),
                                static_cast<TokenId>(ctx_seed * 13 % 100),
                                static_cast<TokenId>(ctx_seed * 29 % 100),
                                static_cast<TokenId>(ctx_seed * 31 % 100)};
        const auto mask = green_mask(cfg, ctx, 1000);
        long green = 0;
        for (uint8_t m : mask) green += m;
        CHECK(static_cast<double>(green) / 1000.0 == doctest::Approx(0.25).epsilon(0.12)); // +/- 0.03
    }
}

TEST_CASE("independent keys agree on gamma^2 + (1-gamma)^2 of tokens") {
    const auto cfg_a = make_config(1);
    const auto cfg_b = make_config(2);
    const TokenSequence ctx{5, 6, 7, 8};
    const auto mask_a = green_mask(cfg_a, ctx, 1000);
    const auto mask_b = green_mask(cfg_b, ctx, 1000);
    long agree = 0;
    for (size_t i = 0; i < mask_a.size(); ++i) {
        if (mask_a[i] == mask_b[i]) ++agree;
    }
    // gamma^2 + (1-gamma)^2 = 0.625 for gamma = 0.25
    CHECK(static_cast<double>(agree) / 1000.0 == doctest::Approx(0.625).epsilon(0.08)); // +/- 0.05
}

TEST_CASE("LeftHash differs from SelfHash but keeps the green rate") {
    auto self_cfg = make_config(77);
    auto left_cfg = self_cfg;
    left_cfg.scheme = HashScheme::LeftHash;
    const TokenSequence ctx{9, 2, 9, 4};
    const auto self_mask = green_mask(self_cfg, ctx, 1000);
    const auto left_mask = green_mask(left_cfg, ctx, 1000);
    long green = 0, same = 0;
    for (size_t i = 0; i < left_mask.size(); ++i) {
        green += left_mask[i];
        if (left_mask[i] == self_mask[i]) ++same;
    }
    CHECK(static_cast<double>(green) / 1000.0 == doctest::Approx(0.25).epsilon(0.15));
    CHECK(same < 1000); // distinct PRF streams
}

TEST_CASE("apply_bias") {
    SUBCASE("delta 0 is the identity") {
        const std::vector<double> logits{0.1, -0.2, 0.3};
        const std::vector<uint8_t> mask{1, 0, 1};
        CHECK(apply_bias(logits, mask, 0.0) == logits);
    }
    SUBCASE("adds exactly delta to green entries") {
        const std::vector<double> logits{0, 0, 0, 0};
        const std::vector<uint8_t> mask{1, 0, 0, 0};
        const auto out = apply_bias(logits, mask, 4.0);
        CHECK(out == std::vector<double>{4, 0, 0, 0});
    }
    SUBCASE("softmax of biased uniform logits: closed form") {
        // one green token of four, delta=4: green prob = e^4 / (e^4 + 3)
        const auto out = apply_bias({0, 0, 0, 0}, {1, 0, 0, 0}, 4.0);
        double denom = 0.0;
        for (double l : out) denom += std::exp(l);
        CHECK(std::exp(out[0]) / denom == doctest::Approx(0.9479).epsilon(1e-4));
    }
    SUBCASE("NaN logit is rejected") {
        CHECK_THROWS_AS(apply_bias({std::nan("")}, {1}, 1.0), std::invalid_argument);
    }
}

TEST_CASE("watermarked_sample distribution properties") {
    const auto corpus = testutil::synthetic_corpus(60, 30, 40, 99);
    const auto model = train_ngram(corpus, 2, 0.2);

    SUBCASE("delta 0 leaves the sampled distribution unchanged") {
        auto cfg = make_config();
        cfg.delta = 0.0;
        const TokenSequence ctx{1, 2};
        const Distribution truth = model.next_distribution(ctx);
        std::vector<long> counts(static_cast<size_t>(model.vocab().size()), 0);
        Rng rng(4242);
        const int draws = 100000;
        for (int i = 0; i < draws; ++i) {
            ++counts[static_cast<size_t>(watermarked_sample(model, ctx, cfg, rng))];
        }
        CHECK(testutil::tv_distance(counts, truth.probs) < 0.01);
    }
    SUBCASE("delta -> infinity emits only green tokens") {
        auto cfg = make_config();
        cfg.delta = 200.0; // e^200 swamps every red logit
        Rng rng(7);
        TokenSequence ctx{0, 1};
        for (int i = 0; i < 200; ++i) {
            const TokenId tok = watermarked_sample(model, ctx, cfg, rng);
            CHECK(is_green(cfg, ctx, tok));
            ctx.push_back(tok);
        }
    }
    SUBCASE("delta=4 pushes mean green fraction past 0.5") {
        const auto cfg = make_config(0x1234);
        Rng rng(2024);
        std::vector<double> fractions;
        for (int g = 0; g < 10; ++g) {
            TokenSequence ctx{static_cast<TokenId>(g % model.vocab().size())};
            const auto tokens = generate(model, ctx, 200, soft_watermark_sampler(cfg), rng);
            TokenSequence full = ctx;
            full.insert(full.end(), tokens.begin(), tokens.end());
            const auto report = detect_z(full, cfg);
            fractions.push_back(static_cast<double>(report.green_count) /
                                static_cast<double>(report.T));
        }
        CHECK(testutil::mean(fractions) >= 0.5);
    }
}

TEST_CASE("detect_z closed-form worked cases") {
    auto cfg = make_config(0xfeedULL);
    const int vocab_size = 600;

    SUBCASE("green count at expectation gives z = 0") {
        const auto tokens = sequence_with_green_count(cfg, 100, 25, vocab_size);
        const auto report = detect_z(tokens, cfg);
        REQUIRE(report.T == 100);
        REQUIRE(report.green_count == 25);
        CHECK(report.z == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("all green: z = 75 / sqrt(18.75)") {
        const auto tokens = sequence_with_green_count(cfg, 100, 100, vocab_size);
        const auto report = detect_z(tokens, cfg);
        REQUIRE(report.green_count == 100);
        CHECK(report.z == doctest::Approx(17.3205080757).epsilon(1e-9));
        CHECK(report.detected());
    }
    SUBCASE("T=200, 70 green: z = 20 / sqrt(37.5)") {
        const auto tokens = sequence_with_green_count(cfg, 200, 70, vocab_size);
        const auto report = detect_z(tokens, cfg);
        CHECK(report.z == doctest::Approx(3.2659863237).epsilon(1e-9));
        CHECK(report.p_value == doctest::Approx(normal_upper_tail(report.z)));
        CHECK_FALSE(report.detected());
    }
    SUBCASE("too-short sequences are rejected") {
        const TokenSequence tokens(static_cast<size_t>(cfg.context_width), 0);
        CHECK_THROWS_AS(detect_z(tokens, cfg), std::invalid_argument);
    }
}

TEST_CASE("detect_z null calibration on random token streams") {
    const auto cfg = make_config(0xa11ce);
    Rng rng(314159);
    const int vocab_size = 500;
    std::vector<double> zs;
    for (int s = 0; s < 200; ++s) {
        TokenSequence tokens;
        for (int i = 0; i < 200; ++i) {
            tokens.push_back(static_cast<TokenId>(rng.next_below(vocab_size)));
        }
        zs.push_back(detect_z(tokens, cfg).z);
    }
    long within_2 = 0;
    for (double z : zs) {
        if (std::abs(z) < 2.0) ++within_2;
    }
    CHECK(std::abs(testutil::mean(zs)) < 0.2);
    CHECK(static_cast<double>(within_2) / 200.0 >= 0.95);
}

TEST_CASE("dedupe flag collapses repeated windows") {
    auto cfg = make_config(3);
    cfg.context_width = 1;
    // one distinct transition in each direction, repeated heavily
    TokenSequence tokens{1, 2, 1, 2, 1, 2, 1, 2, 1, 2};
    const auto plain = detect_z(tokens, cfg);
    cfg.dedupe_contexts = true;
    const auto deduped = detect_z(tokens, cfg);
    CHECK(plain.T == 9);
    CHECK(deduped.T == 2); // (1->2) and (2->1)
}

TEST_CASE("mean z is non-decreasing in delta") {
    const auto corpus = testutil::synthetic_corpus(80, 30, 60, 5);
    const auto model = train_ngram(corpus, 3, 0.1);
    std::vector<double> means;
    for (double delta : {2.0, 4.0, 8.0}) {
        auto cfg = make_config(0xd0dULL);
        cfg.delta = delta;
        std::vector<double> zs;
        for (int g = 0; g < 20; ++g) {
            Rng rng(mix2(900 + static_cast<uint64_t>(g), static_cast<uint64_t>(delta * 10)));
            const auto tokens = generate(model, {}, 200, soft_watermark_sampler(cfg), rng);
            zs.push_back(detect_z(tokens, cfg).z);
        }
        means.push_back(testutil::mean(zs));
    }
    CHECK(means[0] <= means[1] + 0.3);
    CHECK(means[1] <= means[2] + 0.3);
    CHECK(means[2] > means[0]); // strictly stronger at the extremes
}

TEST_CASE("config validation") {
    SoftWatermarkConfig cfg;
    cfg.gamma = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.gamma = 0.25;
    cfg.delta = -1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.delta = 4.0;
    cfg.context_width = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("key_id never exposes the key") {
    CHECK(key_id(42) != key_id(43));
    CHECK(key_id(42) == key_id(42));
    CHECK(key_id(42).size() == 16);
}
