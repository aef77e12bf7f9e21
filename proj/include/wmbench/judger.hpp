#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace wmbench {

enum class TemplateKind { Categorical, Simple };

// The seven judging criteria, in template order.
inline const std::array<const char*, 7> kJudgeCriteria = {
    "Relevance to the prompt", "Depth of detail",          "Clarity of writing",
    "Coherence and logical flow", "Originality and insight", "Use of specific examples",
    "Accuracy of information"};

// Prompt templates are data files with {{PROMPT}}, {{ANSWER_A}} and
// {{ANSWER_B}} substitution slots.
struct JudgerTemplates {
    std::string categorical;
    std::string simple;

    static JudgerTemplates load(const std::string& dir); // <dir>/judger_{categorical,simple}.txt
    const std::string& text(TemplateKind kind) const {
        return kind == TemplateKind::Categorical ? categorical : simple;
    }
};

struct JudgerPrompt {
    TemplateKind kind = TemplateKind::Categorical;
    std::string text;
};

// Byte-exact substitution of the three slots. Throws on empty prompt or
// completions, or if the template is missing a slot.
JudgerPrompt build_prompt(const std::string& template_text, TemplateKind kind,
                          const std::string& source_prompt, const std::string& completion_a,
                          const std::string& completion_b);

// Which completion was shown as assistant A. The assignment is a pure
// function of (pair id, seed) and is recorded before judging so verdicts can
// be de-randomized.
struct PairPresentation {
    std::string pair_id;
    bool watermarked_as_a = false;
    uint64_t seed = 0;
};
PairPresentation randomize_pair(const std::string& pair_id, uint64_t seed);

enum class Choice { A, B, Tie };

struct Verdict {
    Choice choice = Choice::Tie;
    std::optional<std::array<int, 7>> scores; // categorical non-tie verdicts only
    std::string raw;
};

struct UnparseableVerdict : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Extracts the final [[A]]/[[B]]/[[C]] marker (last occurrence wins) and, for
// categorical non-tie verdicts, the trailing comma-separated seven scores in
// 1..5. Tolerant of surrounding prose; throws UnparseableVerdict when no
// marker or a malformed score list is found.
Verdict parse_verdict(const std::string& raw_response, TemplateKind kind);

// Canonical rendering of a verdict ("[[B]]: 3, 3, 5, 5, 4, 3, 5" or "[[C]]");
// parse_verdict of the result round-trips.
std::string render_verdict(const Verdict& verdict);

// Per-criterion scores for both sides after de-randomization.
struct CategoryScores {
    std::array<int, 7> unwatermarked{};
    std::array<int, 7> watermarked{};
};

// Pulls the per-criterion "LLM A: x" / "LLM B: y" scores from the response
// body when the judger followed the categorical layout; nullopt otherwise.
// first = A-side scores, second = B-side scores.
std::optional<std::pair<std::array<int, 7>, std::array<int, 7>>> parse_body_scores(
    const std::string& raw_response);

// Chat-style judger transport: system + user message in, completion text out.
// `attempt` increments across retries so clients can resample.
class JudgerClient {
public:
    virtual ~JudgerClient() = default;
    virtual std::string complete(const std::string& system_message,
                                 const std::string& user_message, int attempt) = 0;
};

// Replays recorded responses keyed by the SHA-256 of the user message; each
// record may carry several responses, consumed per attempt (the last one
// repeats). File format: {"sha256": "...", "responses": ["...", ...]} lines.
class FixtureJudgerClient : public JudgerClient {
public:
    explicit FixtureJudgerClient(const std::string& path);

    std::string complete(const std::string& system_message, const std::string& user_message,
                         int attempt) override;

    static void append_record(const std::string& path, const std::string& user_message,
                              const std::vector<std::string>& responses);

private:
    std::unordered_map<std::string, std::vector<std::string>> records_;
};

// Deterministic offline judger: scores both answers with simple lexical
// statistics (distinct-word ratio, mean word length) and renders a response
// in the categorical body layout so the full parsing path is exercised.
class HeuristicJudgerClient : public JudgerClient {
public:
    explicit HeuristicJudgerClient(uint64_t seed = 0) : seed_(seed) {}

    std::string complete(const std::string& system_message, const std::string& user_message,
                         int attempt) override;

private:
    uint64_t seed_;
};

// POSTs {"messages": [{role, content}...]} to <base_url>/chat and expects
// {"text": "..."}. Bearer credentials from the named environment variable.
class HttpJudgerClient : public JudgerClient {
public:
    HttpJudgerClient(std::string base_url, std::string model,
                     std::string api_key_env = "WMBENCH_API_KEY", int timeout_s = 60,
                     int max_transport_retries = 2);

    std::string complete(const std::string& system_message, const std::string& user_message,
                         int attempt) override;

private:
    std::string base_url_;
    std::string model_;
    std::string api_key_env_;
    int timeout_s_;
    int max_transport_retries_;
};

enum class Outcome { UnwatermarkedPreferred, WatermarkedPreferred, Tie };

struct JudgedPair {
    std::string pair_id;
    Outcome outcome = Outcome::Tie;
    Verdict verdict;
    std::optional<CategoryScores> category_scores;
    int retries = 0;
};

// Judges one presented pair: builds the prompt with the assigned A/B order,
// queries the client, parses, and de-randomizes the choice back to watermark
// identity. Unparseable responses are retried up to max_retries; exhausted
// retries yield nullopt (the sample is unjudgeable).
std::optional<JudgedPair> judge_pair(const PairPresentation& presentation,
                                     const std::string& source_prompt,
                                     const std::string& unwatermarked,
                                     const std::string& watermarked, JudgerClient& client,
                                     const JudgerTemplates& templates, TemplateKind kind,
                                     int max_retries = 3);

struct PreferenceAggregate {
    double pct_unwatermarked = 0.0;
    double pct_watermarked = 0.0;
    double pct_tie = 0.0;
    long n = 0;
};

// Percentage split over judged outcomes. Throws on empty input.
PreferenceAggregate aggregate_preferences(const std::vector<Outcome>& outcomes);

struct CategoryAnalysis {
    // mean (unwatermarked - watermarked) score, conditioned on the verdict
    std::array<double, 7> mean_diff_when_unwatermarked_preferred{};
    std::array<double, 7> mean_diff_when_watermarked_preferred{};
    std::array<double, 7> mean_diff_all{};
    // category-as-classifier tallies: higher score wins the sample
    std::array<long, 7> unwatermarked_wins{};
    std::array<long, 7> watermarked_wins{};
    std::array<long, 7> ties{};
    long n = 0;
};

// Per-category breakdown over judged pairs that carry category scores.
// Throws if none do.
CategoryAnalysis category_analysis(const std::vector<JudgedPair>& judged);

// Pairwise agreement matrix: fraction of shared pairs with identical
// {U, W, Tie} outcomes. All judgers must cover the same pair ids.
std::vector<std::vector<double>> judger_agreement(
    const std::vector<std::map<std::string, Outcome>>& verdict_sets);

// One pair queued for concurrent judging.
struct PairForJudging {
    PairPresentation presentation;
    std::string prompt;
    std::string unwatermarked;
    std::string watermarked;
};

// Judges pairs with at most `max_in_flight` concurrent client calls and
// exponential backoff on transport errors. Output order matches input order;
// nullopt entries are unjudgeable samples.
std::vector<std::optional<JudgedPair>> judge_pairs(const std::vector<PairForJudging>& pairs,
                                                   JudgerClient& client,
                                                   const JudgerTemplates& templates,
                                                   TemplateKind kind, int max_retries = 3,
                                                   int max_in_flight = 4);

} // namespace wmbench
