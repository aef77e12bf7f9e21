#include "wmbench/features.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <stdexcept>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "wmbench/hash.hpp"
#include "wmbench/sha256.hpp"
#include "wmbench/text.hpp"

namespace wmbench {

using nlohmann::json;

void FeatureConfig::validate() const {
    if (dim < 8) throw std::invalid_argument("embedding dimension must be >= 8");
    if (ngram_orders.empty()) throw std::invalid_argument("ngram orders must be non-empty");
    for (int n : ngram_orders) {
        if (n < 1) throw std::invalid_argument("ngram order must be >= 1");
    }
}

EmbeddingVector embed_hashed_ngrams(const std::string& text, const FeatureConfig& config) {
    config.validate();
    const std::vector<std::string> tokens = tokenize(text);
    if (tokens.empty()) throw std::invalid_argument("cannot embed empty text");

    const uint64_t seed = avalanche(config.hash_seed ^ 0x25f1c9a8b7e04d63ULL);
    EmbeddingVector v(static_cast<size_t>(config.dim), 0.0);
    std::string gram;
    for (int order : config.ngram_orders) {
        if (static_cast<size_t>(order) > tokens.size()) continue;
        for (size_t i = 0; i + static_cast<size_t>(order) <= tokens.size(); ++i) {
            gram.clear();
            for (int k = 0; k < order; ++k) {
                if (k) gram.push_back('\x1f');
                gram += tokens[i + static_cast<size_t>(k)];
            }
            const uint64_t h = mix2(seed, fnv1a(gram));
            const size_t bucket = h % static_cast<uint64_t>(config.dim);
            const double sign = (h >> 63) ? 1.0 : -1.0;
            v[bucket] += sign;
        }
    }

    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
        // signed sums can cancel exactly; fall back to a length-1 indicator
        v[mix2(seed, fnv1a(text)) % static_cast<uint64_t>(config.dim)] = 1.0;
        return v;
    }
    for (double& x : v) x /= norm;
    return v;
}

FixtureEmbeddingClient::FixtureEmbeddingClient(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embedding fixture file: " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json rec = json::parse(line);
        records_[rec.at("sha256").get<std::string>()] =
            rec.at("embedding").get<std::vector<double>>();
    }
}

EmbeddingVector FixtureEmbeddingClient::embed(const std::string& text) {
    const auto it = records_.find(sha256_hex(text));
    if (it == records_.end()) {
        throw std::runtime_error("embedding fixture miss for text hash " + sha256_hex(text));
    }
    return it->second;
}

void FixtureEmbeddingClient::append_record(const std::string& path, const std::string& text,
                                           const EmbeddingVector& embedding) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("cannot open embedding fixture file for append: " + path);
    json rec;
    rec["sha256"] = sha256_hex(text);
    rec["embedding"] = embedding;
    out << rec.dump() << "\n";
}

HttpEmbeddingClient::HttpEmbeddingClient(std::string base_url, std::string model,
                                         int expected_dim, std::string api_key_env,
                                         int timeout_s, int max_retries)
    : base_url_(std::move(base_url)),
      model_(std::move(model)),
      expected_dim_(expected_dim),
      api_key_env_(std::move(api_key_env)),
      timeout_s_(timeout_s),
      max_retries_(max_retries) {}

EmbeddingVector HttpEmbeddingClient::embed(const std::string& text) {
    json req;
    req["input"] = text;
    req["model"] = model_;
    const std::string body = req.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= max_retries_; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(100 << (attempt - 1)));
        }
        httplib::Client cli(base_url_);
        cli.set_connection_timeout(timeout_s_);
        cli.set_read_timeout(timeout_s_);
        httplib::Headers headers;
        if (const char* key = std::getenv(api_key_env_.c_str()); key && *key) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
        auto res = cli.Post("/embed", headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "server error " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw std::runtime_error("embedding request failed with status " +
                                     std::to_string(res->status));
        }
        const json resp = json::parse(res->body);
        EmbeddingVector out = resp.at("embedding").get<std::vector<double>>();
        if (expected_dim_ > 0 && static_cast<int>(out.size()) != expected_dim_) {
            throw std::runtime_error("embedding dimension mismatch: expected " +
                                     std::to_string(expected_dim_) + ", got " +
                                     std::to_string(out.size()));
        }
        return out;
    }
    throw std::runtime_error("embedding request failed after retries: " + last_error);
}

EmbeddingVector embed_external(const std::string& text, EmbeddingClient& client) {
    if (tokenize(text).empty()) throw std::invalid_argument("cannot embed empty text");
    return client.embed(text);
}

std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts,
                                         EmbeddingClient& client, int max_in_flight) {
    if (max_in_flight < 1) throw std::invalid_argument("max_in_flight must be >= 1");
    std::vector<EmbeddingVector> out(texts.size());
    size_t next = 0;
    while (next < texts.size()) {
        const size_t begin = next;
        const size_t end = std::min(texts.size(), begin + static_cast<size_t>(max_in_flight));
        std::vector<std::future<EmbeddingVector>> futures;
        for (size_t i = begin; i < end; ++i) {
            futures.push_back(std::async(std::launch::async, [&client, &texts, i] {
                return embed_external(texts[i], client);
            }));
        }
        for (size_t i = begin; i < end; ++i) out[i] = futures[i - begin].get();
        next = end;
    }
    return out;
}

} // namespace wmbench
