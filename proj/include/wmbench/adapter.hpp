#pragma once

#include <memory>
#include <optional>
#include <string>

#include "wmbench/token_model.hpp"

namespace wmbench {

// Hash key for a context, used to index adapter fixtures.
uint64_t context_hash(const TokenSequence& context);

// Transport for the external-model wire contract:
//   request  {"context": [int], "top_k": optional int}
//   response {"probs": [float]}
class DistributionClient {
public:
    virtual ~DistributionClient() = default;
    virtual std::vector<double> next_probs(const TokenSequence& context,
                                           std::optional<int> top_k) = 0;
};

// Replays recorded distributions from a line-delimited JSON file; each line is
// {"context_hash": "<hex>", "probs": [..]}. Identical (context, seed) always
// replays identically. Missing context -> std::runtime_error.
class FixtureDistributionClient : public DistributionClient {
public:
    explicit FixtureDistributionClient(const std::string& path);

    std::vector<double> next_probs(const TokenSequence& context,
                                   std::optional<int> top_k) override;

    // Writes one fixture record; used to record replay files.
    static void append_record(const std::string& path, const TokenSequence& context,
                              const std::vector<double>& probs);

private:
    std::unordered_map<uint64_t, std::vector<double>> records_;
};

// POSTs the wire contract to <base_url>/next_token. Retries transport
// failures up to max_retries with short backoff.
class HttpDistributionClient : public DistributionClient {
public:
    HttpDistributionClient(std::string base_url, int timeout_s = 10, int max_retries = 2);
    ~HttpDistributionClient() override;

    std::vector<double> next_probs(const TokenSequence& context,
                                   std::optional<int> top_k) override;

private:
    std::string base_url_;
    int timeout_s_;
    int max_retries_;
};

// TokenModel backed by a DistributionClient; the stand-in contract for
// querying a real LM without running one here.
class AdapterModel : public TokenModel {
public:
    AdapterModel(Vocabulary vocab, std::shared_ptr<DistributionClient> client);

    const Vocabulary& vocab() const override { return vocab_; }
    Distribution next_distribution(const TokenSequence& context) const override;

private:
    Vocabulary vocab_;
    std::shared_ptr<DistributionClient> client_;
};

} // namespace wmbench
