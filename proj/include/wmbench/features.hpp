#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace wmbench {

using EmbeddingVector = std::vector<double>;

struct FeatureConfig {
    enum class Source { External, HashedNgram };

    Source source = Source::HashedNgram;
    int dim = 1536;                        // D; >= 8
    std::vector<int> ngram_orders{1, 2, 3};
    uint64_t hash_seed = 0;

    void validate() const;
};

// Deterministic offline embedder: signed feature hashing of word n-grams into
// `dim` buckets, L2-normalized. Throws on empty text (no tokens).
EmbeddingVector embed_hashed_ngrams(const std::string& text, const FeatureConfig& config);

// External embedding-service contract:
//   request  {"input": string, "model": string}
//   response {"embedding": [float]}
class EmbeddingClient {
public:
    virtual ~EmbeddingClient() = default;
    virtual EmbeddingVector embed(const std::string& text) = 0;
};

// Replays recorded vectors from a line-delimited JSON file keyed by the
// SHA-256 of the text: {"sha256": "...", "embedding": [..]}. Byte-stable
// across runs; missing text -> std::runtime_error.
class FixtureEmbeddingClient : public EmbeddingClient {
public:
    explicit FixtureEmbeddingClient(const std::string& path);

    EmbeddingVector embed(const std::string& text) override;

    static void append_record(const std::string& path, const std::string& text,
                              const EmbeddingVector& embedding);

private:
    std::unordered_map<std::string, EmbeddingVector> records_;
};

// POSTs the contract to <base_url>/embed. Credentials come from the named
// environment variable and are sent as a bearer token, never persisted.
// Transport and 5xx failures retry with backoff; a response of the wrong
// dimension is fatal.
class HttpEmbeddingClient : public EmbeddingClient {
public:
    HttpEmbeddingClient(std::string base_url, std::string model, int expected_dim,
                        std::string api_key_env = "WMBENCH_API_KEY", int timeout_s = 30,
                        int max_retries = 2);

    EmbeddingVector embed(const std::string& text) override;

private:
    std::string base_url_;
    std::string model_;
    int expected_dim_;
    std::string api_key_env_;
    int timeout_s_;
    int max_retries_;
};

// Embeds via the client; throws on empty text. The one entry point the
// classifier pipeline uses for external vectors.
EmbeddingVector embed_external(const std::string& text, EmbeddingClient& client);

// Embeds a batch with at most `max_in_flight` concurrent requests; output
// order matches input order.
std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts,
                                         EmbeddingClient& client, int max_in_flight = 4);

} // namespace wmbench
