#pragma once

// Shared helpers for the test suites: synthetic corpora, simple statistics,
// and independent oracles kept deliberately separate from the library code
// they check.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "wmbench/hash.hpp"
#include "wmbench/token_model.hpp"

namespace testutil {

// Deterministic pseudo-text corpus: `lines` lines of `words_per_line` words
// drawn from a `vocab_size`-word synthetic vocabulary with mild bigram
// structure, so trained models carry entropy at every step.
inline std::vector<std::vector<std::string>> synthetic_corpus(int lines, int words_per_line,
                                                              int vocab_size, uint64_t seed) {
    std::vector<std::string> words;
    words.reserve(static_cast<size_t>(vocab_size));
    for (int i = 0; i < vocab_size; ++i) words.push_back("w" + std::to_string(i));

    wmbench::Rng rng(seed);
    std::vector<std::vector<std::string>> corpus;
    for (int l = 0; l < lines; ++l) {
        std::vector<std::string> line;
        uint64_t prev = rng.next_below(static_cast<uint64_t>(vocab_size));
        for (int w = 0; w < words_per_line; ++w) {
            // half the time continue a "theme" near the previous word
            uint64_t next;
            if (rng.next_unit() < 0.5) {
                next = (prev + 1 + rng.next_below(8)) % static_cast<uint64_t>(vocab_size);
            } else {
                next = rng.next_below(static_cast<uint64_t>(vocab_size));
            }
            line.push_back(words[static_cast<size_t>(next)]);
            prev = next;
        }
        corpus.push_back(std::move(line));
    }
    return corpus;
}

inline double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

inline double mean(const std::vector<double>& values) {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

// Total variation distance between an empirical count vector and a
// probability vector.
inline double tv_distance(const std::vector<long>& counts, const std::vector<double>& probs) {
    long total = 0;
    for (long c : counts) total += c;
    double tv = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        tv += std::abs(static_cast<double>(counts[i]) / total - probs[i]);
    }
    return 0.5 * tv;
}

// Kolmogorov-Smirnov statistic of samples against Uniform(0,1).
inline double ks_uniform(std::vector<double> samples) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double ks = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        const double x = samples[i];
        ks = std::max(ks, std::abs(static_cast<double>(i + 1) / n - x));
        ks = std::max(ks, std::abs(x - static_cast<double>(i) / n));
    }
    return ks;
}

} // namespace testutil
