#include "wmbench/judger.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "wmbench/hash.hpp"
#include "wmbench/sha256.hpp"
#include "wmbench/text.hpp"

namespace wmbench {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open template file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Replaces exactly one occurrence of `slot`; throws if absent.
void substitute(std::string& text, const std::string& slot, const std::string& value) {
    const size_t pos = text.find(slot);
    if (pos == std::string::npos) {
        throw std::invalid_argument("template is missing slot " + slot);
    }
    text.replace(pos, slot.size(), value);
}

} // namespace

JudgerTemplates JudgerTemplates::load(const std::string& dir) {
    JudgerTemplates t;
    t.categorical = read_file(dir + "/judger_categorical.txt");
    t.simple = read_file(dir + "/judger_simple.txt");
    return t;
}

JudgerPrompt build_prompt(const std::string& template_text, TemplateKind kind,
                          const std::string& source_prompt, const std::string& completion_a,
                          const std::string& completion_b) {
    if (source_prompt.empty()) throw std::invalid_argument("empty source prompt");
    if (completion_a.empty() || completion_b.empty()) {
        throw std::invalid_argument("empty completion");
    }
    JudgerPrompt prompt;
    prompt.kind = kind;
    prompt.text = template_text;
    substitute(prompt.text, "{{PROMPT}}", source_prompt);
    substitute(prompt.text, "{{ANSWER_A}}", completion_a);
    substitute(prompt.text, "{{ANSWER_B}}", completion_b);
    return prompt;
}

PairPresentation randomize_pair(const std::string& pair_id, uint64_t seed) {
    PairPresentation p;
    p.pair_id = pair_id;
    p.seed = seed;
    p.watermarked_as_a = (mix2(seed, fnv1a(pair_id)) & 1ULL) != 0;
    return p;
}

namespace {

struct Marker {
    size_t pos = std::string::npos;
    Choice choice = Choice::Tie;
    size_t len = 0;
};

Marker last_marker(const std::string& text) {
    Marker best;
    const std::pair<const char*, Choice> markers[] = {
        {"[[A]]", Choice::A}, {"[[B]]", Choice::B}, {"[[C]]", Choice::Tie}};
    for (const auto& [pat, choice] : markers) {
        const size_t pos = text.rfind(pat);
        if (pos != std::string::npos && (best.pos == std::string::npos || pos > best.pos)) {
            best.pos = pos;
            best.choice = choice;
            best.len = 5;
        }
    }
    return best;
}

// Parses ", "-separated integers following the winning marker. Exactly seven
// values in 1..5 are required.
std::array<int, 7> parse_score_list(const std::string& text, size_t start) {
    size_t i = start;
    auto skip_ws = [&] {
        while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    };
    skip_ws();
    if (i >= text.size() || text[i] != ':') {
        throw UnparseableVerdict("categorical verdict is missing its score list");
    }
    ++i;
    std::array<int, 7> scores{};
    for (int k = 0; k < 7; ++k) {
        skip_ws();
        if (k > 0) {
            if (i >= text.size() || text[i] != ',') {
                throw UnparseableVerdict("expected 7 comma-separated scores");
            }
            ++i;
            skip_ws();
        }
        size_t digits = 0;
        int value = 0;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
            value = value * 10 + (text[i] - '0');
            ++i;
            ++digits;
        }
        if (digits == 0) throw UnparseableVerdict("expected 7 comma-separated scores");
        if (value < 1 || value > 5) throw UnparseableVerdict("score outside 1..5");
        scores[static_cast<size_t>(k)] = value;
    }
    return scores;
}

} // namespace

Verdict parse_verdict(const std::string& raw_response, TemplateKind kind) {
    const Marker marker = last_marker(raw_response);
    if (marker.pos == std::string::npos) {
        throw UnparseableVerdict("no [[A]]/[[B]]/[[C]] marker found");
    }
    Verdict verdict;
    verdict.raw = raw_response;
    verdict.choice = marker.choice;
    if (kind == TemplateKind::Categorical && marker.choice != Choice::Tie) {
        verdict.scores = parse_score_list(raw_response, marker.pos + marker.len);
    }
    return verdict;
}

std::string render_verdict(const Verdict& verdict) {
    switch (verdict.choice) {
        case Choice::Tie:
            return "[[C]]";
        case Choice::A:
        case Choice::B: {
            std::string out = verdict.choice == Choice::A ? "[[A]]" : "[[B]]";
            if (verdict.scores) {
                out += ":";
                for (int k = 0; k < 7; ++k) {
                    out += k ? ", " : " ";
                    out += std::to_string((*verdict.scores)[static_cast<size_t>(k)]);
                }
            }
            return out;
        }
    }
    return "[[C]]";
}

std::optional<std::pair<std::array<int, 7>, std::array<int, 7>>> parse_body_scores(
    const std::string& raw) {
    auto collect = [&](const std::string& label) {
        std::vector<int> values;
        size_t pos = 0;
        while ((pos = raw.find(label, pos)) != std::string::npos) {
            size_t i = pos + label.size();
            while (i < raw.size() && (raw[i] == ' ' || raw[i] == '\t')) ++i;
            if (i < raw.size() && raw[i] >= '1' && raw[i] <= '5' &&
                (i + 1 >= raw.size() || !std::isdigit(static_cast<unsigned char>(raw[i + 1])))) {
                values.push_back(raw[i] - '0');
            }
            pos += label.size();
        }
        return values;
    };
    const std::vector<int> a = collect("LLM A:");
    const std::vector<int> b = collect("LLM B:");
    if (a.size() != 7 || b.size() != 7) return std::nullopt;
    std::array<int, 7> arr_a{}, arr_b{};
    std::copy(a.begin(), a.end(), arr_a.begin());
    std::copy(b.begin(), b.end(), arr_b.begin());
    return std::make_pair(arr_a, arr_b);
}

FixtureJudgerClient::FixtureJudgerClient(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open judger fixture file: " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json rec = json::parse(line);
        records_[rec.at("sha256").get<std::string>()] =
            rec.at("responses").get<std::vector<std::string>>();
    }
}

std::string FixtureJudgerClient::complete(const std::string&, const std::string& user_message,
                                          int attempt) {
    const auto it = records_.find(sha256_hex(user_message));
    if (it == records_.end() || it->second.empty()) {
        throw std::runtime_error("judger fixture miss for prompt hash " +
                                 sha256_hex(user_message));
    }
    const size_t idx = std::min(static_cast<size_t>(std::max(attempt, 0)), it->second.size() - 1);
    return it->second[idx];
}

void FixtureJudgerClient::append_record(const std::string& path, const std::string& user_message,
                                        const std::vector<std::string>& responses) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("cannot open judger fixture file for append: " + path);
    json rec;
    rec["sha256"] = sha256_hex(user_message);
    rec["responses"] = responses;
    out << rec.dump() << "\n";
}

namespace {

struct AnswerSections {
    std::string a;
    std::string b;
};

AnswerSections extract_answers(const std::string& prompt_text) {
    const std::string a_header = "[LLM A's Answer]";
    const std::string b_header = "[LLM B's Answer]";
    const size_t a_pos = prompt_text.find(a_header);
    const size_t b_pos = prompt_text.find(b_header);
    if (a_pos == std::string::npos || b_pos == std::string::npos || b_pos <= a_pos) {
        throw std::runtime_error("prompt does not contain answer sections");
    }
    AnswerSections out;
    out.a = prompt_text.substr(a_pos + a_header.size(), b_pos - a_pos - a_header.size());
    out.b = prompt_text.substr(b_pos + b_header.size());
    return out;
}

struct LexicalStats {
    double distinct_ratio = 0.0;
    double mean_word_len = 0.0;
    size_t words = 0;
};

LexicalStats lexical_stats(const std::string& text) {
    const std::vector<std::string> tokens = tokenize(text);
    LexicalStats s;
    s.words = tokens.size();
    if (tokens.empty()) return s;
    std::set<std::string> distinct(tokens.begin(), tokens.end());
    s.distinct_ratio = static_cast<double>(distinct.size()) / tokens.size();
    size_t chars = 0;
    for (const auto& t : tokens) chars += t.size();
    s.mean_word_len = static_cast<double>(chars) / tokens.size();
    return s;
}

int likert(double x) { return std::clamp(static_cast<int>(std::lround(x)), 1, 5); }

} // namespace

std::string HeuristicJudgerClient::complete(const std::string&, const std::string& user_message,
                                            int) {
    const AnswerSections answers = extract_answers(user_message);
    const LexicalStats sa = lexical_stats(answers.a);
    const LexicalStats sb = lexical_stats(answers.b);

    // composite quality proxy: vocabulary diversity with a slight length term
    const double qa = sa.distinct_ratio + 0.02 * std::log1p(static_cast<double>(sa.words));
    const double qb = sb.distinct_ratio + 0.02 * std::log1p(static_cast<double>(sb.words));

    const bool categorical = user_message.find("Criteria:") != std::string::npos;
    Choice choice = Choice::Tie;
    if (std::abs(qa - qb) >= 0.01) choice = qa > qb ? Choice::A : Choice::B;

    std::ostringstream os;
    if (!categorical) {
        os << "Comparing the two completions on clarity and variety of expression, ";
        os << (choice == Choice::Tie ? "the responses are of similar quality."
                                     : "one response reads noticeably better.");
        os << "\n\nFinal verdict: " << (choice == Choice::A   ? "[[A]]"
                                        : choice == Choice::B ? "[[B]]"
                                                              : "[[C]]");
        return os.str();
    }

    std::array<int, 7> score_a{}, score_b{};
    const uint64_t ha = mix2(seed_, fnv1a(answers.a));
    const uint64_t hb = mix2(seed_, fnv1a(answers.b));
    for (int k = 0; k < 7; ++k) {
        const double jitter_a = (u64_to_unit(mix2(ha, static_cast<uint64_t>(k))) - 0.5);
        const double jitter_b = (u64_to_unit(mix2(hb, static_cast<uint64_t>(k))) - 0.5);
        score_a[static_cast<size_t>(k)] = likert(1.0 + 4.0 * sa.distinct_ratio + jitter_a);
        score_b[static_cast<size_t>(k)] = likert(1.0 + 4.0 * sb.distinct_ratio + jitter_b);
    }

    os << "In my assessment, "
       << (choice == Choice::Tie ? "the responses are comparable in quality."
           : choice == Choice::A ? "the superior response is from LLM A."
                                 : "the superior response is from LLM B.")
       << "\n\n";
    for (int k = 0; k < 7; ++k) {
        os << (k + 1) << ". " << kJudgeCriteria[static_cast<size_t>(k)] << ":\n";
        os << "   - LLM A: " << score_a[static_cast<size_t>(k)] << "\n";
        os << "   - LLM B: " << score_b[static_cast<size_t>(k)] << "\n\n";
    }
    os << "Based on the evaluation above, my verdict is:\n\n";
    Verdict v;
    v.choice = choice;
    if (choice != Choice::Tie) v.scores = choice == Choice::A ? score_a : score_b;
    os << render_verdict(v);
    return os.str();
}

HttpJudgerClient::HttpJudgerClient(std::string base_url, std::string model,
                                   std::string api_key_env, int timeout_s,
                                   int max_transport_retries)
    : base_url_(std::move(base_url)),
      model_(std::move(model)),
      api_key_env_(std::move(api_key_env)),
      timeout_s_(timeout_s),
      max_transport_retries_(max_transport_retries) {}

std::string HttpJudgerClient::complete(const std::string& system_message,
                                       const std::string& user_message, int attempt) {
    json req;
    req["model"] = model_;
    // attempt feeds temperature so unparseable verdicts are resampled
    req["temperature"] = attempt == 0 ? 0.0 : 0.7;
    req["messages"] = json::array();
    if (!system_message.empty()) {
        req["messages"].push_back({{"role", "system"}, {"content", system_message}});
    }
    req["messages"].push_back({{"role", "user"}, {"content", user_message}});
    const std::string body = req.dump();

    std::string last_error;
    for (int t = 0; t <= max_transport_retries_; ++t) {
        if (t > 0) std::this_thread::sleep_for(std::chrono::milliseconds(200 << (t - 1)));
        httplib::Client cli(base_url_);
        cli.set_connection_timeout(timeout_s_);
        cli.set_read_timeout(timeout_s_);
        httplib::Headers headers;
        if (const char* key = std::getenv(api_key_env_.c_str()); key && *key) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
        auto res = cli.Post("/chat", headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "server error " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw std::runtime_error("judger request failed with status " +
                                     std::to_string(res->status));
        }
        return json::parse(res->body).at("text").get<std::string>();
    }
    throw std::runtime_error("judger request failed after retries: " + last_error);
}

std::optional<JudgedPair> judge_pair(const PairPresentation& presentation,
                                     const std::string& source_prompt,
                                     const std::string& unwatermarked,
                                     const std::string& watermarked, JudgerClient& client,
                                     const JudgerTemplates& templates, TemplateKind kind,
                                     int max_retries) {
    const std::string& a = presentation.watermarked_as_a ? watermarked : unwatermarked;
    const std::string& b = presentation.watermarked_as_a ? unwatermarked : watermarked;
    const JudgerPrompt prompt = build_prompt(templates.text(kind), kind, source_prompt, a, b);

    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        const std::string response = client.complete("", prompt.text, attempt);
        Verdict verdict;
        try {
            verdict = parse_verdict(response, kind);
        } catch (const UnparseableVerdict&) {
            continue;
        }

        JudgedPair judged;
        judged.pair_id = presentation.pair_id;
        judged.verdict = verdict;
        judged.retries = attempt;
        switch (verdict.choice) {
            case Choice::Tie:
                judged.outcome = Outcome::Tie;
                break;
            case Choice::A:
                judged.outcome = presentation.watermarked_as_a ? Outcome::WatermarkedPreferred
                                                               : Outcome::UnwatermarkedPreferred;
                break;
            case Choice::B:
                judged.outcome = presentation.watermarked_as_a ? Outcome::UnwatermarkedPreferred
                                                               : Outcome::WatermarkedPreferred;
                break;
        }
        if (kind == TemplateKind::Categorical) {
            if (const auto body = parse_body_scores(response)) {
                CategoryScores cs;
                cs.watermarked = presentation.watermarked_as_a ? body->first : body->second;
                cs.unwatermarked = presentation.watermarked_as_a ? body->second : body->first;
                judged.category_scores = cs;
            }
        }
        return judged;
    }
    return std::nullopt;
}

PreferenceAggregate aggregate_preferences(const std::vector<Outcome>& outcomes) {
    if (outcomes.empty()) throw std::invalid_argument("no verdicts to aggregate");
    PreferenceAggregate agg;
    agg.n = static_cast<long>(outcomes.size());
    long u = 0, w = 0, t = 0;
    for (Outcome o : outcomes) {
        switch (o) {
            case Outcome::UnwatermarkedPreferred: ++u; break;
            case Outcome::WatermarkedPreferred: ++w; break;
            case Outcome::Tie: ++t; break;
        }
    }
    const double n = static_cast<double>(agg.n);
    agg.pct_unwatermarked = 100.0 * u / n;
    agg.pct_watermarked = 100.0 * w / n;
    agg.pct_tie = 100.0 * t / n;
    return agg;
}

CategoryAnalysis category_analysis(const std::vector<JudgedPair>& judged) {
    CategoryAnalysis out;
    std::array<double, 7> sum_u_pref{}, sum_w_pref{}, sum_all{};
    long n_u_pref = 0, n_w_pref = 0;
    for (const auto& j : judged) {
        if (!j.category_scores) continue;
        ++out.n;
        if (j.outcome == Outcome::UnwatermarkedPreferred) ++n_u_pref;
        if (j.outcome == Outcome::WatermarkedPreferred) ++n_w_pref;
        for (int k = 0; k < 7; ++k) {
            const size_t kk = static_cast<size_t>(k);
            const double diff = static_cast<double>(j.category_scores->unwatermarked[kk]) -
                                static_cast<double>(j.category_scores->watermarked[kk]);
            sum_all[kk] += diff;
            if (j.outcome == Outcome::UnwatermarkedPreferred) sum_u_pref[kk] += diff;
            if (j.outcome == Outcome::WatermarkedPreferred) sum_w_pref[kk] += diff;
            if (diff > 0) {
                ++out.unwatermarked_wins[kk];
            } else if (diff < 0) {
                ++out.watermarked_wins[kk];
            } else {
                ++out.ties[kk];
            }
        }
    }
    if (out.n == 0) throw std::invalid_argument("no categorical scores to analyze");
    for (int k = 0; k < 7; ++k) {
        const size_t kk = static_cast<size_t>(k);
        out.mean_diff_all[kk] = sum_all[kk] / static_cast<double>(out.n);
        out.mean_diff_when_unwatermarked_preferred[kk] =
            n_u_pref ? sum_u_pref[kk] / static_cast<double>(n_u_pref) : 0.0;
        out.mean_diff_when_watermarked_preferred[kk] =
            n_w_pref ? sum_w_pref[kk] / static_cast<double>(n_w_pref) : 0.0;
    }
    return out;
}

std::vector<std::vector<double>> judger_agreement(
    const std::vector<std::map<std::string, Outcome>>& verdict_sets) {
    if (verdict_sets.empty()) throw std::invalid_argument("no verdict sets");
    const auto& reference = verdict_sets.front();
    for (const auto& set : verdict_sets) {
        if (set.size() != reference.size()) {
            throw std::invalid_argument("verdict sets cover different pair ids");
        }
        for (const auto& [id, _] : set) {
            if (!reference.count(id)) {
                throw std::invalid_argument("verdict sets cover different pair ids");
            }
        }
    }
    const size_t j = verdict_sets.size();
    std::vector<std::vector<double>> matrix(j, std::vector<double>(j, 0.0));
    for (size_t i = 0; i < j; ++i) {
        for (size_t k = 0; k < j; ++k) {
            long same = 0;
            for (const auto& [id, outcome] : verdict_sets[i]) {
                if (verdict_sets[k].at(id) == outcome) ++same;
            }
            matrix[i][k] = static_cast<double>(same) / static_cast<double>(reference.size());
        }
    }
    return matrix;
}

std::vector<std::optional<JudgedPair>> judge_pairs(const std::vector<PairForJudging>& pairs,
                                                   JudgerClient& client,
                                                   const JudgerTemplates& templates,
                                                   TemplateKind kind, int max_retries,
                                                   int max_in_flight) {
    if (max_in_flight < 1) throw std::invalid_argument("max_in_flight must be >= 1");
    std::vector<std::optional<JudgedPair>> out(pairs.size());

    auto judge_one = [&](size_t i) {
        // exponential backoff on transport failures; parse retries live inside
        for (int t = 0;; ++t) {
            try {
                return judge_pair(pairs[i].presentation, pairs[i].prompt, pairs[i].unwatermarked,
                                  pairs[i].watermarked, client, templates, kind, max_retries);
            } catch (const std::exception&) {
                if (t >= 2) throw;
                std::this_thread::sleep_for(std::chrono::milliseconds(100 << t));
            }
        }
    };

    size_t next = 0;
    while (next < pairs.size()) {
        const size_t begin = next;
        const size_t end = std::min(pairs.size(), begin + static_cast<size_t>(max_in_flight));
        std::vector<std::future<std::optional<JudgedPair>>> futures;
        for (size_t i = begin; i < end; ++i) {
            futures.push_back(std::async(std::launch::async, judge_one, i));
        }
        for (size_t i = begin; i < end; ++i) out[i] = futures[i - begin].get();
        next = end;
    }
    return out;
}

} // namespace wmbench
