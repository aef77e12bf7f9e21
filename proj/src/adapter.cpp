#include "wmbench/adapter.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace wmbench {

using nlohmann::json;

uint64_t context_hash(const TokenSequence& context) {
    uint64_t h = 0x6a7f3c1d9be52a41ULL;
    for (TokenId id : context) h = mix2(h, static_cast<uint64_t>(static_cast<uint32_t>(id)));
    return h;
}

namespace {
std::string hex64(uint64_t x) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << x;
    return os.str();
}
} // namespace

FixtureDistributionClient::FixtureDistributionClient(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open adapter fixture file: " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json rec = json::parse(line);
        const uint64_t key = std::stoull(rec.at("context_hash").get<std::string>(), nullptr, 16);
        records_[key] = rec.at("probs").get<std::vector<double>>();
    }
}

std::vector<double> FixtureDistributionClient::next_probs(const TokenSequence& context,
                                                          std::optional<int>) {
    const auto it = records_.find(context_hash(context));
    if (it == records_.end()) {
        throw std::runtime_error("adapter fixture miss for context hash " +
                                 hex64(context_hash(context)));
    }
    return it->second;
}

void FixtureDistributionClient::append_record(const std::string& path,
                                              const TokenSequence& context,
                                              const std::vector<double>& probs) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("cannot open adapter fixture file for append: " + path);
    json rec;
    rec["context_hash"] = hex64(context_hash(context));
    rec["probs"] = probs;
    out << rec.dump() << "\n";
}

HttpDistributionClient::HttpDistributionClient(std::string base_url, int timeout_s,
                                               int max_retries)
    : base_url_(std::move(base_url)), timeout_s_(timeout_s), max_retries_(max_retries) {}

HttpDistributionClient::~HttpDistributionClient() = default;

std::vector<double> HttpDistributionClient::next_probs(const TokenSequence& context,
                                                       std::optional<int> top_k) {
    json req;
    req["context"] = context;
    if (top_k) req["top_k"] = *top_k;
    const std::string body = req.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= max_retries_; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(50 << (attempt - 1)));
        }
        httplib::Client cli(base_url_);
        cli.set_connection_timeout(timeout_s_);
        cli.set_read_timeout(timeout_s_);
        auto res = cli.Post("/next_token", body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "server error " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw std::runtime_error("adapter request failed with status " +
                                     std::to_string(res->status));
        }
        const json resp = json::parse(res->body);
        return resp.at("probs").get<std::vector<double>>();
    }
    throw std::runtime_error("adapter request failed after retries: " + last_error);
}

AdapterModel::AdapterModel(Vocabulary vocab, std::shared_ptr<DistributionClient> client)
    : vocab_(std::move(vocab)), client_(std::move(client)) {
    if (!client_) throw std::invalid_argument("adapter client is null");
}

Distribution AdapterModel::next_distribution(const TokenSequence& context) const {
    for (TokenId id : context) {
        if (id < 0 || id >= vocab_.size()) {
            throw std::invalid_argument("context token id out of vocabulary");
        }
    }
    Distribution dist;
    dist.probs = client_->next_probs(context, std::nullopt);
    if (static_cast<int>(dist.probs.size()) != vocab_.size()) {
        throw std::runtime_error("adapter returned distribution of wrong dimension");
    }
    dist.validate();
    return dist;
}

} // namespace wmbench
