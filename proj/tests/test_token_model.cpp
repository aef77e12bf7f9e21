#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <stdexcept>

#include "wmbench/text.hpp"
#include "wmbench/token_model.hpp"

using namespace wmbench;

TEST_CASE("tokenize lowercases and splits on whitespace") {
    const auto tokens = tokenize("  The quick\tBrown \n FOX ");
    REQUIRE(tokens.size() == 4);
    CHECK(tokens[0] == "the");
    CHECK(tokens[1] == "quick");
    CHECK(tokens[2] == "brown");
    CHECK(tokens[3] == "fox");
    CHECK(tokenize("").empty());
    CHECK(tokenize("   \n\t ").empty());
}

TEST_CASE("vocabulary is a bijection with stable insertion-order ids") {
    Vocabulary vocab;
    CHECK(vocab.add("a") == 0);
    CHECK(vocab.add("b") == 1);
    CHECK(vocab.add("a") == 0);
    CHECK(vocab.size() == 2);
    CHECK(vocab.id_of("b") == 1);
    CHECK(vocab.id_of("zzz") == -1);
    CHECK(vocab.token(0) == "a");
    CHECK_THROWS_AS(vocab.token(5), std::invalid_argument);
    CHECK_THROWS_AS(vocab.encode({"a", "nope"}), std::invalid_argument);
}

TEST_CASE("train_ngram relative frequencies") {
    SUBCASE("only observed successor dominates as alpha -> 0") {
        const auto model = train_ngram({{"a", "b", "a", "b"}}, 2, 1e-9);
        const Distribution dist = model.next_distribution({model.vocab().id_of("a")});
        CHECK(dist.probs[static_cast<size_t>(model.vocab().id_of("b"))] ==
              doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("single-symbol corpus, order 1") {
        const auto model = train_ngram({{"a", "a"}}, 1, 1e-9);
        const Distribution dist = model.next_distribution({});
        CHECK(dist.probs[0] == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("split successors: hand count of bigram frequencies") {
        const auto model = train_ngram({{"a", "b"}, {"a", "c"}}, 2, 1e-9);
        const Distribution dist = model.next_distribution({model.vocab().id_of("a")});
        CHECK(dist.probs[static_cast<size_t>(model.vocab().id_of("b"))] ==
              doctest::Approx(0.5).epsilon(1e-6));
        CHECK(dist.probs[static_cast<size_t>(model.vocab().id_of("c"))] ==
              doctest::Approx(0.5).epsilon(1e-6));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(train_ngram({}, 2, 0.1), std::invalid_argument);
        CHECK_THROWS_AS(train_ngram({{"a"}}, 0, 0.1), std::invalid_argument);
        CHECK_THROWS_AS(train_ngram({{"a"}}, 1, 0.0), std::invalid_argument);
    }
}

TEST_CASE("next_distribution") {
    const auto model = train_ngram({{"a", "b", "a", "b"}}, 2, 0.01);

    SUBCASE("valid distribution everywhere") {
        for (TokenId ctx = 0; ctx < model.vocab().size(); ++ctx) {
            CHECK_NOTHROW(model.next_distribution({ctx}).validate());
        }
    }
    SUBCASE("argmax after context 'a' is 'b'") {
        const Distribution dist = model.next_distribution({model.vocab().id_of("a")});
        TokenId argmax = 0;
        for (TokenId i = 1; i < model.vocab().size(); ++i) {
            if (dist.probs[static_cast<size_t>(i)] > dist.probs[static_cast<size_t>(argmax)]) {
                argmax = i;
            }
        }
        CHECK(argmax == model.vocab().id_of("b"));
    }
    SUBCASE("unknown token id in context") {
        CHECK_THROWS_AS(model.next_distribution({99}), std::invalid_argument);
    }
    SUBCASE("order-1 model ignores context") {
        const auto unigram = train_ngram({{"a", "b", "b"}}, 1, 0.1);
        const Distribution d1 = unigram.next_distribution({});
        const Distribution d2 = unigram.next_distribution({0, 1, 0});
        for (size_t i = 0; i < d1.probs.size(); ++i) CHECK(d1.probs[i] == d2.probs[i]);
    }
    SUBCASE("unseen context is uniform (pure smoothing mass)") {
        const auto m = train_ngram({{"a", "b"}, {"c", "d"}}, 3, 0.5);
        // context (d, a) never appears in training
        const Distribution dist =
            m.next_distribution({m.vocab().id_of("d"), m.vocab().id_of("a")});
        for (double p : dist.probs) {
            CHECK(p == doctest::Approx(1.0 / m.vocab().size()).epsilon(1e-12));
        }
    }
}

TEST_CASE("distribution validation rejects bad vectors") {
    Distribution bad_sum{{0.5, 0.4}};
    CHECK_THROWS_AS(bad_sum.validate(), std::invalid_argument);
    Distribution negative{{1.5, -0.5}};
    CHECK_THROWS_AS(negative.validate(), std::invalid_argument);
    Distribution ok{{0.25, 0.75}};
    CHECK_NOTHROW(ok.validate());
}

TEST_CASE("sample") {
    SUBCASE("point mass always selects its token") {
        Distribution dist{{1.0, 0.0, 0.0}};
        Rng rng(7);
        for (int i = 0; i < 20; ++i) CHECK(sample(dist, rng) == 0);
    }
    SUBCASE("two-point distribution matches Monte Carlo frequency") {
        Distribution dist{{0.5, 0.5}};
        Rng rng(123);
        int count0 = 0;
        const int draws = 100000;
        for (int i = 0; i < draws; ++i) {
            if (sample(dist, rng) == 0) ++count0;
        }
        const double freq = static_cast<double>(count0) / draws;
        CHECK(freq == doctest::Approx(0.5).epsilon(0.02)); // 0.5 +/- 0.01
    }
    SUBCASE("fixed seed reproduces the draw") {
        Distribution dist{{0.3, 0.3, 0.4}};
        Rng rng1(42), rng2(42);
        for (int i = 0; i < 50; ++i) CHECK(sample(dist, rng1) == sample(dist, rng2));
    }
    SUBCASE("degenerate vector") {
        Distribution zeros{{0.0, 0.0}};
        Rng rng(1);
        CHECK_THROWS_AS(sample(zeros, rng), std::invalid_argument);
    }
}

TEST_CASE("generate") {
    const auto model = train_ngram({{"a", "b", "a", "b", "a", "c"}}, 2, 0.1);

    SUBCASE("length must be positive") {
        Rng rng(1);
        CHECK_THROWS_AS(generate(model, {}, 0, plain_sampler(), rng), std::invalid_argument);
    }
    SUBCASE("returns exactly length new tokens") {
        Rng rng(1);
        const auto out = generate(model, {0}, 17, plain_sampler(), rng);
        CHECK(out.size() == 17);
    }
    SUBCASE("same seed gives identical completions") {
        Rng rng1(99), rng2(99);
        const auto out1 = generate(model, {0}, 40, plain_sampler(), rng1);
        const auto out2 = generate(model, {0}, 40, plain_sampler(), rng2);
        CHECK(out1 == out2);
    }
    SUBCASE("point-mass model forces its token") {
        const auto forced = train_ngram({{"x", "x", "x"}}, 1, 1e-9);
        Rng rng(5);
        const auto out = generate(forced, {}, 1, plain_sampler(), rng);
        REQUIRE(out.size() == 1);
        CHECK(forced.vocab().token(out[0]) == "x");
    }
}

TEST_CASE("apply_temperature") {
    Distribution dist{{0.8, 0.2}};
    const Distribution same = apply_temperature(dist, 1.0);
    CHECK(same.probs[0] == dist.probs[0]);
    // T -> 0 sharpens toward the argmax
    const Distribution cold = apply_temperature(dist, 0.25);
    CHECK(cold.probs[0] > 0.99);
    const Distribution hot = apply_temperature(dist, 100.0);
    CHECK(hot.probs[0] == doctest::Approx(0.5).epsilon(0.05));
    CHECK_THROWS_AS(apply_temperature(dist, 0.0), std::invalid_argument);
}

TEST_CASE("first_words splice") {
    CHECK(first_words("one  two   three", 2) == "one two");
    CHECK(first_words("one two", 50) == "one two");
    CHECK(first_words("", 50).empty());
}
