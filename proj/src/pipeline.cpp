#include "wmbench/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>
#include <sstream>
#include <stdexcept>

#include "wmbench/sha256.hpp"
#include "wmbench/text.hpp"

namespace wmbench {

namespace {

constexpr uint64_t kUnwatermarkedRole = 0x9b6d4a52e1c3870fULL;
constexpr uint64_t kWatermarkedRole = 0x4e21f8c5a7d0b396ULL;
constexpr uint64_t kJudgeStream = 0x2c8a61f3b59e0d74ULL;

uint64_t id_prefix_u64(const std::string& hex_id) {
    return std::stoull(hex_id.substr(0, 16), nullptr, 16);
}

std::string fmt(double value, int precision = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, value);
    return buf;
}

} // namespace

std::string splice_prompt(const std::string& document, int max_words) {
    const std::string out = first_words(document, max_words);
    if (out.empty()) throw std::invalid_argument("empty document");
    return out;
}

std::vector<DocumentRecord> ingest_files(const std::vector<std::string>& paths,
                                         const std::string& tag) {
    std::vector<DocumentRecord> docs;
    for (const auto& path : paths) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot read corpus file: " + path);
        std::string line;
        while (std::getline(in, line)) {
            if (tokenize(line).empty()) continue;
            DocumentRecord doc;
            doc.tag = tag;
            doc.text = line;
            doc.id = sha256_hex(tag + "\x1f" + line).substr(0, 16);
            docs.push_back(std::move(doc));
        }
    }
    return docs;
}

void save_documents(const std::string& path, const std::vector<DocumentRecord>& docs) {
    std::vector<DocumentRecord> merged;
    std::set<std::string> ids;
    if (std::filesystem::exists(path)) {
        merged = load_documents(path);
        for (const auto& d : merged) ids.insert(d.id);
    }
    for (const auto& d : docs) {
        if (ids.insert(d.id).second) merged.push_back(d);
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write document file: " + path);
    for (const auto& d : merged) {
        json j{{"id", d.id}, {"tag", d.tag}, {"text", d.text}};
        out << j.dump() << "\n";
    }
}

std::vector<DocumentRecord> load_documents(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read document file: " + path);
    std::vector<DocumentRecord> docs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        docs.push_back({j.at("id").get<std::string>(), j.at("tag").get<std::string>(),
                        j.at("text").get<std::string>()});
    }
    return docs;
}

std::string scheme_name(Scheme scheme) {
    switch (scheme) {
        case Scheme::None: return "none";
        case Scheme::Soft: return "soft";
        case Scheme::Exp: return "exp";
    }
    return "none";
}

Scheme parse_scheme(const std::string& name) {
    if (name == "none") return Scheme::None;
    if (name == "soft") return Scheme::Soft;
    if (name == "exp") return Scheme::Exp;
    throw std::invalid_argument("unknown watermark scheme: " + name);
}

json WatermarkSpec::params_json() const {
    json p;
    p["scheme"] = scheme_name(scheme);
    if (scheme == Scheme::Soft) {
        p["gamma"] = soft.gamma;
        p["delta"] = soft.delta;
        p["context_width"] = soft.context_width;
        p["self_hash"] = soft.scheme == HashScheme::SelfHash;
        p["key_id"] = key_id(soft.key);
    } else if (scheme == Scheme::Exp) {
        p["n"] = exp_n;
        p["edit_penalty"] = edit_penalty;
        p["key_id"] = key_id(exp_key);
    }
    return p;
}

std::string ExperimentConfig::fingerprint() const {
    json f;
    f["order"] = model.order;
    f["alpha"] = model.alpha;
    f["length"] = length;
    f["temperature"] = temperature;
    f["master_seed"] = master_seed;
    f["scheme"] = scheme_name(watermark.scheme);
    if (watermark.scheme == Scheme::Soft) {
        f["gamma"] = watermark.soft.gamma;
        f["delta"] = watermark.soft.delta;
        f["context_width"] = watermark.soft.context_width;
        f["self_hash"] = watermark.soft.scheme == HashScheme::SelfHash;
        f["key"] = watermark.soft.key; // fingerprint only feeds the id hash
    } else if (watermark.scheme == Scheme::Exp) {
        f["n"] = watermark.exp_n;
        f["key"] = watermark.exp_key;
        f["edit_penalty"] = watermark.edit_penalty;
    }
    return sha256_hex(f.dump());
}

json pair_to_json(const GenerationPair& pair) {
    json j;
    j["id"] = pair.id;
    j["tag"] = pair.tag;
    j["prompt"] = pair.prompt;
    j["unwatermarked"] = pair.unwatermarked;
    j["watermarked"] = pair.watermarked;
    j["scheme"] = scheme_name(pair.scheme);
    j["params"] = pair.params;
    j["seed"] = pair.seed;
    j["wall_unwatermarked_s"] = pair.wall_unwatermarked_s;
    j["wall_watermarked_s"] = pair.wall_watermarked_s;
    return j;
}

GenerationPair pair_from_json(const json& j) {
    GenerationPair p;
    p.id = j.at("id").get<std::string>();
    p.tag = j.at("tag").get<std::string>();
    p.prompt = j.at("prompt").get<std::string>();
    p.unwatermarked = j.at("unwatermarked").get<std::string>();
    p.watermarked = j.at("watermarked").get<std::string>();
    p.scheme = parse_scheme(j.at("scheme").get<std::string>());
    p.params = j.at("params");
    p.seed = j.at("seed").get<uint64_t>();
    p.wall_unwatermarked_s = j.value("wall_unwatermarked_s", 0.0);
    p.wall_watermarked_s = j.value("wall_watermarked_s", 0.0);
    return p;
}

void save_pairs(const std::string& path, const std::vector<GenerationPair>& pairs) {
    std::set<std::string> ids;
    std::vector<GenerationPair> merged;
    if (std::filesystem::exists(path)) {
        merged = load_pairs(path);
        for (const auto& p : merged) ids.insert(p.id);
    }
    for (const auto& p : pairs) {
        if (ids.insert(p.id).second) merged.push_back(p);
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write pair file: " + path);
    for (const auto& p : merged) out << pair_to_json(p).dump() << "\n";
}

std::vector<GenerationPair> load_pairs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read pair file: " + path);
    std::vector<GenerationPair> pairs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        pairs.push_back(pair_from_json(json::parse(line)));
    }
    return pairs;
}

NGramModel train_model_from_corpus(const std::string& corpus_path, int order, double alpha) {
    std::ifstream in(corpus_path);
    if (!in) throw std::runtime_error("cannot read corpus file: " + corpus_path);
    std::vector<std::vector<std::string>> corpus;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> tokens = tokenize(line);
        if (!tokens.empty()) corpus.push_back(std::move(tokens));
    }
    return train_ngram(corpus, order, alpha);
}

namespace {

// Prompt words absent from the model vocabulary are dropped from the model
// context (they still appear in the stored prompt text).
TokenSequence encode_known(const Vocabulary& vocab, const std::string& text) {
    TokenSequence ids;
    for (const auto& word : tokenize(text)) {
        const TokenId id = vocab.id_of(word);
        if (id >= 0) ids.push_back(id);
    }
    return ids;
}

std::string decode_text(const Vocabulary& vocab, const TokenSequence& ids) {
    return join_tokens(vocab.decode(ids));
}

GenerationPair generate_one_pair(const NGramModel& model, const DocumentRecord& doc,
                                 const ExperimentConfig& config,
                                 const std::string& fingerprint) {
    GenerationPair pair;
    pair.tag = doc.tag;
    pair.prompt = splice_prompt(doc.text);
    pair.id = sha256_hex(doc.id + "\x1f" + fingerprint).substr(0, 16);
    pair.scheme = config.watermark.scheme;
    pair.params = config.watermark.params_json();
    pair.seed = mix2(config.master_seed, id_prefix_u64(pair.id));
    pair.params["length"] = config.length;
    pair.params["temperature"] = config.temperature;

    const TokenSequence prompt_ids = encode_known(model.vocab(), pair.prompt);

    using clock = std::chrono::steady_clock;
    {
        Rng rng(mix2(pair.seed, kUnwatermarkedRole));
        const auto t0 = clock::now();
        const TokenSequence ids =
            generate(model, prompt_ids, config.length, plain_sampler(config.temperature), rng);
        pair.wall_unwatermarked_s = std::chrono::duration<double>(clock::now() - t0).count();
        pair.unwatermarked = decode_text(model.vocab(), ids);
    }
    {
        const auto t0 = clock::now();
        TokenSequence ids;
        if (config.watermark.scheme == Scheme::Soft) {
            Rng rng(mix2(pair.seed, kWatermarkedRole));
            ids = generate(model, prompt_ids, config.length,
                           soft_watermark_sampler(config.watermark.soft, config.temperature), rng);
        } else if (config.watermark.scheme == Scheme::Exp) {
            const KeySequence keyseq(config.watermark.exp_key, config.watermark.exp_n,
                                     model.vocab().size());
            const int start_offset =
                static_cast<int>(mix2(pair.seed, kWatermarkedRole) %
                                 static_cast<uint64_t>(config.watermark.exp_n));
            pair.params["start_offset"] = start_offset;
            ids = generate_watermarked(model, prompt_ids, config.length, keyseq, start_offset,
                                       config.temperature);
        } else {
            Rng rng(mix2(pair.seed, kWatermarkedRole));
            ids = generate(model, prompt_ids, config.length, plain_sampler(config.temperature),
                           rng);
        }
        pair.wall_watermarked_s = std::chrono::duration<double>(clock::now() - t0).count();
        pair.watermarked = decode_text(model.vocab(), ids);
    }
    return pair;
}

} // namespace

GenerationRun run_generation(const NGramModel& model, const std::vector<DocumentRecord>& docs,
                             const ExperimentConfig& config, int parallelism) {
    if (parallelism < 1) parallelism = 1;
    const std::string fingerprint = config.fingerprint();
    GenerationRun run;
    run.pairs.resize(docs.size());
    std::vector<char> ok(docs.size(), 0);

    auto worker = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            try {
                run.pairs[i] = generate_one_pair(model, docs[i], config, fingerprint);
                ok[i] = 1;
            } catch (const std::exception&) {
                ok[i] = 0; // skipped; counted below
            }
        }
    };

    if (parallelism == 1 || docs.size() < 2) {
        worker(0, docs.size());
    } else {
        std::vector<std::future<void>> futures;
        const size_t chunk = (docs.size() + static_cast<size_t>(parallelism) - 1) /
                             static_cast<size_t>(parallelism);
        for (int w = 0; w < parallelism; ++w) {
            const size_t begin = static_cast<size_t>(w) * chunk;
            const size_t end = std::min(docs.size(), begin + chunk);
            if (begin >= end) break;
            futures.push_back(std::async(std::launch::async, worker, begin, end));
        }
        for (auto& f : futures) f.get();
    }

    GenerationRun out;
    for (size_t i = 0; i < docs.size(); ++i) {
        if (ok[i]) {
            out.pairs.push_back(std::move(run.pairs[i]));
        } else {
            ++out.skipped;
        }
    }
    return out;
}

std::vector<json> run_detection(const Vocabulary& vocab, const std::vector<GenerationPair>& pairs,
                                const WatermarkSpec& spec, int exp_resamples, int parallelism) {
    if (parallelism < 1) parallelism = 1;
    struct Task {
        size_t pair_index;
        const std::string* text;
        const char* side;
    };
    std::vector<Task> tasks;
    for (size_t i = 0; i < pairs.size(); ++i) {
        tasks.push_back({i, &pairs[i].unwatermarked, "unwatermarked"});
        tasks.push_back({i, &pairs[i].watermarked, "watermarked"});
    }
    std::vector<json> rows(tasks.size());

    auto detect_one = [&](const Task& task) {
        const TokenSequence ids = encode_known(vocab, *task.text);
        json row;
        row["pair_id"] = pairs[task.pair_index].id;
        row["side"] = task.side;
        row["scheme"] = scheme_name(spec.scheme);
        if (spec.scheme == Scheme::Soft) {
            const DetectionReport report = detect_z(ids, spec.soft);
            row["T"] = report.T;
            row["green_count"] = report.green_count;
            row["z"] = report.z;
            row["p_value"] = report.p_value;
            row["gamma"] = spec.soft.gamma;
            row["delta"] = spec.soft.delta;
            row["key_id"] = key_id(spec.soft.key);
        } else if (spec.scheme == Scheme::Exp) {
            const KeySequence keyseq(spec.exp_key, spec.exp_n, vocab.size());
            const AlignmentReport report =
                detect_permutation(ids, keyseq, exp_resamples, spec.edit_penalty,
                                   0x7c3f9a15d2e8b641ULL, 1);
            row["observed_cost"] = report.observed_cost;
            row["p_value"] = report.p_value;
            row["n_resamples"] = report.n_resamples;
            row["n"] = spec.exp_n;
            row["key_id"] = key_id(spec.exp_key);
        } else {
            throw std::invalid_argument("detection requires a watermark scheme");
        }
        return row;
    };

    auto worker = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) rows[i] = detect_one(tasks[i]);
    };

    if (parallelism == 1 || tasks.size() < 2) {
        worker(0, tasks.size());
    } else {
        std::vector<std::future<void>> futures;
        const size_t chunk = (tasks.size() + static_cast<size_t>(parallelism) - 1) /
                             static_cast<size_t>(parallelism);
        for (int w = 0; w < parallelism; ++w) {
            const size_t begin = static_cast<size_t>(w) * chunk;
            const size_t end = std::min(tasks.size(), begin + chunk);
            if (begin >= end) break;
            futures.push_back(std::async(std::launch::async, worker, begin, end));
        }
        for (auto& f : futures) f.get();
    }
    return rows;
}

namespace {

Dataset build_dataset(const std::vector<GenerationPair>& pairs,
                      const ClassifierRunConfig& config, std::vector<std::string>& tags,
                      std::vector<std::string>& pair_ids) {
    std::unique_ptr<FixtureEmbeddingClient> fixture;
    if (config.features.source == FeatureConfig::Source::External) {
        fixture = std::make_unique<FixtureEmbeddingClient>(config.fixture_path);
    }
    auto embed = [&](const std::string& text) {
        if (fixture) return embed_external(text, *fixture);
        return embed_hashed_ngrams(text, config.features);
    };

    Dataset ds;
    for (const auto& pair : pairs) {
        ds.x.push_back(embed(pair.unwatermarked));
        ds.y.push_back(0);
        tags.push_back(pair.tag);
        pair_ids.push_back(pair.id);
        ds.x.push_back(embed(pair.watermarked));
        ds.y.push_back(1);
        tags.push_back(pair.tag);
        pair_ids.push_back(pair.id);
    }
    return ds;
}

} // namespace

json ClassifierRunResult::to_json() const {
    json j;
    j["mode"] = mode;
    j["n_samples"] = n_samples;
    j["accuracy"] = metrics.accuracy;
    j["auc"] = metrics.auc;
    j["false_unwatermarked_rate"] = metrics.false_unwatermarked_rate;
    j["false_watermarked_rate"] = metrics.false_watermarked_rate;
    j["confusion"] = {{"tp", metrics.tp}, {"tn", metrics.tn}, {"fp", metrics.fp}, {"fn", metrics.fn}};
    j["folds"] = json::array();
    for (const auto& f : metrics.folds) {
        j["folds"].push_back({{"fold", f.fold},
                              {"n_test", f.n_test},
                              {"accuracy", f.accuracy},
                              {"auc", f.auc},
                              {"false_unwatermarked_rate", f.false_unwatermarked_rate},
                              {"false_watermarked_rate", f.false_watermarked_rate}});
    }
    if (grid) {
        j["grid"] = {{"evaluated", grid->evaluated.size()},
                     {"best",
                      {{"learning_rate", grid->best.learning_rate},
                       {"weight_decay", grid->best.weight_decay},
                       {"batch_size", grid->best.batch_size},
                       {"shuffle", grid->best.shuffle}}}};
    }
    return j;
}

ClassifierRunResult run_classifier(const std::vector<GenerationPair>& pairs,
                                   const ClassifierRunConfig& config) {
    if (pairs.empty()) throw std::invalid_argument("no pairs to classify");
    std::vector<std::string> tags, pair_ids;
    const Dataset dataset = build_dataset(pairs, config, tags, pair_ids);

    ClassifierRunResult result;
    result.n_samples = static_cast<long>(dataset.size());

    TrainConfig train_config = config.train;
    train_config.seed = mix2(config.seed, 0xc1a55ULL);

    if (config.mode == ClassifierRunConfig::Mode::CrossTag) {
        std::set<std::string> distinct(tags.begin(), tags.end());
        if (distinct.size() < 2) {
            throw std::invalid_argument("cross-tag mode needs at least two dataset tags");
        }
        if (!distinct.count(config.train_tag)) {
            throw std::invalid_argument("train tag not present: " + config.train_tag);
        }
        Dataset train, test;
        std::set<std::string> train_ids, test_ids;
        for (size_t i = 0; i < dataset.size(); ++i) {
            if (tags[i] == config.train_tag) {
                train.x.push_back(dataset.x[i]);
                train.y.push_back(dataset.y[i]);
                train_ids.insert(pair_ids[i]);
            } else {
                test.x.push_back(dataset.x[i]);
                test.y.push_back(dataset.y[i]);
                test_ids.insert(pair_ids[i]);
            }
        }
        for (const auto& id : test_ids) {
            if (train_ids.count(id)) {
                throw std::logic_error("train/test pair id overlap in cross-tag mode");
            }
        }
        result.mode = "cross-tag:" + config.train_tag;

        std::vector<double> scores;
        std::vector<int> labels = test.y;
        if (config.logistic) {
            const LogisticModel model = logistic_train(train, config.logistic_l2);
            for (const auto& x : test.x) scores.push_back(logistic_predict(model, x));
        } else {
            if (config.use_grid) {
                const GridSearchResult grid =
                    grid_search(train, config.hidden_sizes, train_config, config.seed);
                result.grid = grid;
                train_config = grid.best;
            }
            std::vector<int> sizes;
            sizes.push_back(train.dim());
            sizes.insert(sizes.end(), config.hidden_sizes.begin(), config.hidden_sizes.end());
            sizes.push_back(1);
            const TrainResult trained =
                train_mlp(MLPParams::init(sizes, train_config.seed), train, train_config);
            for (const auto& x : test.x) scores.push_back(mlp_forward(trained.params, x));
        }
        result.metrics = metrics_from_scores(scores, labels);
        return result;
    }

    result.mode = "pooled-" + std::to_string(config.k) + "fold";
    if (config.logistic) {
        result.metrics = logistic_kfold(dataset, config.logistic_l2, config.k, config.seed);
        return result;
    }
    if (config.use_grid) {
        const GridSearchResult grid =
            grid_search(dataset, config.hidden_sizes, train_config, config.seed);
        result.grid = grid;
        train_config = grid.best;
    }
    result.metrics = kfold_evaluate(dataset, config.hidden_sizes, train_config, config.k,
                                    config.seed);
    return result;
}

namespace {

json aggregate_to_json(const PreferenceAggregate& agg) {
    return json{{"pct_unwatermarked", agg.pct_unwatermarked},
                {"pct_watermarked", agg.pct_watermarked},
                {"pct_tie", agg.pct_tie},
                {"n", agg.n}};
}

} // namespace

json JudgingRunResult::to_json() const {
    json j;
    j["overall"] = aggregate_to_json(overall);
    j["by_tag"] = json::object();
    for (const auto& [tag, agg] : by_tag) j["by_tag"][tag] = aggregate_to_json(agg);
    j["unjudgeable"] = unjudgeable;
    j["skipped"] = skipped;
    if (categories) {
        json cats = json::array();
        for (int k = 0; k < 7; ++k) {
            const size_t kk = static_cast<size_t>(k);
            cats.push_back({{"category", kJudgeCriteria[kk]},
                            {"mean_diff_all", categories->mean_diff_all[kk]},
                            {"mean_diff_when_unwatermarked_preferred",
                             categories->mean_diff_when_unwatermarked_preferred[kk]},
                            {"mean_diff_when_watermarked_preferred",
                             categories->mean_diff_when_watermarked_preferred[kk]},
                            {"unwatermarked_wins", categories->unwatermarked_wins[kk]},
                            {"watermarked_wins", categories->watermarked_wins[kk]},
                            {"ties", categories->ties[kk]}});
        }
        j["categories"] = cats;
        j["categories_n"] = categories->n;
    }
    return j;
}

JudgingRunResult run_judging(const std::vector<GenerationPair>& pairs, JudgerClient& client,
                             const JudgerTemplates& templates, const JudgingRunConfig& config) {
    JudgingRunResult result;
    std::vector<PairForJudging> queue;
    std::vector<std::string> queue_tags;
    for (const auto& pair : pairs) {
        if (pair.prompt.empty() || pair.unwatermarked.empty() || pair.watermarked.empty()) {
            ++result.skipped;
            continue;
        }
        PairForJudging item;
        item.presentation = randomize_pair(pair.id, mix2(config.seed, kJudgeStream));
        item.prompt = pair.prompt;
        item.unwatermarked = pair.unwatermarked;
        item.watermarked = pair.watermarked;
        queue.push_back(std::move(item));
        queue_tags.push_back(pair.tag);
    }

    const auto judged =
        judge_pairs(queue, client, templates, config.kind, config.max_retries,
                    config.max_in_flight);

    std::vector<Outcome> outcomes;
    std::map<std::string, std::vector<Outcome>> outcomes_by_tag;
    for (size_t i = 0; i < judged.size(); ++i) {
        if (!judged[i]) {
            ++result.unjudgeable;
            continue;
        }
        result.judged.push_back(*judged[i]);
        outcomes.push_back(judged[i]->outcome);
        outcomes_by_tag[queue_tags[i]].push_back(judged[i]->outcome);

        json record;
        record["pair_id"] = judged[i]->pair_id;
        record["template"] =
            config.kind == TemplateKind::Categorical ? "categorical" : "simple";
        record["assignment"] =
            queue[i].presentation.watermarked_as_a ? "watermarked_as_a" : "unwatermarked_as_a";
        record["choice"] = judged[i]->verdict.choice == Choice::A   ? "A"
                           : judged[i]->verdict.choice == Choice::B ? "B"
                                                                    : "C";
        record["outcome"] = judged[i]->outcome == Outcome::UnwatermarkedPreferred ? "unwatermarked"
                            : judged[i]->outcome == Outcome::WatermarkedPreferred ? "watermarked"
                                                                                  : "tie";
        if (judged[i]->verdict.scores) {
            record["scores"] = *judged[i]->verdict.scores;
        }
        record["retries"] = judged[i]->retries;
        result.verdict_records.push_back(std::move(record));
    }

    if (!outcomes.empty()) {
        result.overall = aggregate_preferences(outcomes);
        for (const auto& [tag, tag_outcomes] : outcomes_by_tag) {
            result.by_tag[tag] = aggregate_preferences(tag_outcomes);
        }
        const bool any_scores = std::any_of(result.judged.begin(), result.judged.end(),
                                            [](const JudgedPair& j) {
                                                return j.category_scores.has_value();
                                            });
        if (any_scores) result.categories = category_analysis(result.judged);
    }
    return result;
}

namespace {

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

struct CsvWriter {
    std::ostringstream rows;

    void add(const std::string& section, const std::string& metric, const std::string& group,
             const std::string& value) {
        rows << section << "," << metric << "," << group << "," << value << "\n";
    }
    void add(const std::string& section, const std::string& metric, const std::string& group,
             double value) {
        add(section, metric, group, fmt(value, 6));
    }
};

} // namespace

void write_report(const ReportInputs& inputs, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::ostringstream txt;
    CsvWriter csv;
    csv.rows << "section,metric,group,value\n";

    txt << "==== wmbench report ====\n";

    if (inputs.pairs) {
        const auto& pairs = *inputs.pairs;
        txt << "\n[generation]\n";
        txt << "pairs: " << pairs.size() << "\n";
        std::map<std::string, long> by_tag;
        for (const auto& p : pairs) ++by_tag[p.tag];
        for (const auto& [tag, count] : by_tag) {
            txt << "  tag " << tag << ": " << count << "\n";
            csv.add("generation", "pairs", tag, static_cast<double>(count));
        }
        if (!pairs.empty()) {
            txt << "scheme: " << scheme_name(pairs.front().scheme) << " "
                << pairs.front().params.dump() << "\n";
        }
        csv.add("generation", "pairs", "all", static_cast<double>(pairs.size()));
        if (inputs.include_timing && !pairs.empty()) {
            double unwm = 0.0, wm = 0.0;
            for (const auto& p : pairs) {
                unwm += p.wall_unwatermarked_s;
                wm += p.wall_watermarked_s;
            }
            txt << "mean wall time per completion: unwatermarked " << fmt(unwm / pairs.size(), 6)
                << "s, watermarked " << fmt(wm / pairs.size(), 6) << "s (ratio "
                << fmt(wm / std::max(unwm, 1e-12), 2) << "x)\n";
        }
    } else {
        txt << "\n[generation]\n(no pair records supplied)\n";
    }

    if (inputs.detections) {
        const auto& rows = *inputs.detections;
        const bool soft = !rows.empty() && rows.front().contains("z");
        txt << "\n[detection." << (soft ? "soft" : "exp") << "]\n";
        for (const std::string side : {"unwatermarked", "watermarked"}) {
            std::vector<double> zs, ps;
            long detected = 0, n = 0;
            for (const auto& row : rows) {
                if (row.at("side").get<std::string>() != side) continue;
                ++n;
                if (soft) {
                    const double z = row.at("z").get<double>();
                    zs.push_back(z);
                    if (z >= 4.0) ++detected;
                } else {
                    const double p = row.at("p_value").get<double>();
                    ps.push_back(p);
                    if (p <= 0.05) ++detected;
                }
            }
            if (n == 0) continue;
            if (soft) {
                double mean_z = 0.0;
                for (double z : zs) mean_z += z;
                mean_z /= static_cast<double>(n);
                txt << side << ": n=" << n << " mean_z=" << fmt(mean_z) << " median_z="
                    << fmt(median(zs)) << " frac_z>=4=" << fmt(static_cast<double>(detected) / n)
                    << "\n";
                csv.add("detection_soft", "median_z", side, median(zs));
                csv.add("detection_soft", "frac_z_ge_4", side,
                        static_cast<double>(detected) / n);
            } else {
                double mean_p = 0.0;
                for (double p : ps) mean_p += p;
                mean_p /= static_cast<double>(n);
                txt << side << ": n=" << n << " mean_p=" << fmt(mean_p) << " frac_p<=0.05="
                    << fmt(static_cast<double>(detected) / n) << "\n";
                csv.add("detection_exp", "frac_p_le_0.05", side,
                        static_cast<double>(detected) / n);
            }
        }
    } else {
        txt << "\n[detection]\n(no detection rows supplied)\n";
    }

    if (inputs.classifier_metrics) {
        const json& m = *inputs.classifier_metrics;
        txt << "\n[classifier]\n";
        txt << "mode: " << m.value("mode", "?") << " (n=" << m.value("n_samples", 0L) << ")\n";
        txt << "accuracy=" << fmt(m.value("accuracy", 0.0)) << " auc=" << fmt(m.value("auc", 0.0))
            << " false_unwatermarked=" << fmt(m.value("false_unwatermarked_rate", 0.0))
            << " false_watermarked=" << fmt(m.value("false_watermarked_rate", 0.0)) << "\n";
        csv.add("classifier", "accuracy", "all", m.value("accuracy", 0.0));
        csv.add("classifier", "auc", "all", m.value("auc", 0.0));
        csv.add("classifier", "false_unwatermarked_rate", "all",
                m.value("false_unwatermarked_rate", 0.0));
        csv.add("classifier", "false_watermarked_rate", "all",
                m.value("false_watermarked_rate", 0.0));
        if (m.contains("folds")) {
            for (const auto& f : m.at("folds")) {
                txt << "  fold " << f.value("fold", 0) << ": accuracy="
                    << fmt(f.value("accuracy", 0.0)) << " auc=" << fmt(f.value("auc", 0.0))
                    << " n_test=" << f.value("n_test", 0L) << "\n";
            }
        }
        if (m.contains("grid")) {
            txt << "grid: evaluated " << m.at("grid").value("evaluated", size_t{0})
                << " configurations\n";
        }
    } else {
        txt << "\n[classifier]\n(no classifier metrics supplied)\n";
    }

    if (inputs.judging) {
        const json& j = *inputs.judging;
        txt << "\n[judging]\n";
        const json& overall = j.at("overall");
        txt << "overall: unwatermarked=" << fmt(overall.value("pct_unwatermarked", 0.0), 1)
            << "% watermarked=" << fmt(overall.value("pct_watermarked", 0.0), 1)
            << "% tie=" << fmt(overall.value("pct_tie", 0.0), 1) << "% (n="
            << overall.value("n", 0L) << ")\n";
        csv.add("judging", "pct_unwatermarked", "all", overall.value("pct_unwatermarked", 0.0));
        csv.add("judging", "pct_watermarked", "all", overall.value("pct_watermarked", 0.0));
        csv.add("judging", "pct_tie", "all", overall.value("pct_tie", 0.0));
        if (j.contains("by_tag")) {
            for (const auto& [tag, agg] : j.at("by_tag").items()) {
                txt << "  tag " << tag << ": unwatermarked="
                    << fmt(agg.value("pct_unwatermarked", 0.0), 1) << "% watermarked="
                    << fmt(agg.value("pct_watermarked", 0.0), 1) << "% tie="
                    << fmt(agg.value("pct_tie", 0.0), 1) << "%\n";
                csv.add("judging", "pct_unwatermarked", tag,
                        agg.value("pct_unwatermarked", 0.0));
            }
        }
        txt << "unjudgeable: " << j.value("unjudgeable", 0L) << ", skipped: "
            << j.value("skipped", 0L) << "\n";
        if (j.contains("categories")) {
            txt << "category breakdown (mean unwatermarked - watermarked):\n";
            for (const auto& cat : j.at("categories")) {
                txt << "  " << cat.value("category", "?") << ": diff="
                    << fmt(cat.value("mean_diff_all", 0.0)) << " wins(U/W/tie)="
                    << cat.value("unwatermarked_wins", 0L) << "/"
                    << cat.value("watermarked_wins", 0L) << "/" << cat.value("ties", 0L) << "\n";
                csv.add("judging_categories", "mean_diff", cat.value("category", "?"),
                        cat.value("mean_diff_all", 0.0));
            }
        }
    } else {
        txt << "\n[judging]\n(no judging results supplied)\n";
    }

    if (inputs.sweep_rows) {
        txt << "\n[sweep]\n";
        txt << "delta  median_z  frac_z>=4  accuracy  auc\n";
        for (const auto& row : *inputs.sweep_rows) {
            txt << fmt(row.value("delta", 0.0), 1) << "  " << fmt(row.value("median_z", 0.0))
                << "  " << fmt(row.value("frac_z_ge_4", 0.0)) << "  "
                << fmt(row.value("accuracy", 0.0)) << "  " << fmt(row.value("auc", 0.0)) << "\n";
            csv.add("sweep", "accuracy", fmt(row.value("delta", 0.0), 1),
                    row.value("accuracy", 0.0));
            csv.add("sweep", "median_z", fmt(row.value("delta", 0.0), 1),
                    row.value("median_z", 0.0));
        }
    }

    std::ofstream report_file(out_dir + "/report.txt", std::ios::trunc | std::ios::binary);
    if (!report_file) throw std::runtime_error("cannot write report file");
    report_file << txt.str();
    std::ofstream csv_file(out_dir + "/summary.csv", std::ios::trunc | std::ios::binary);
    if (!csv_file) throw std::runtime_error("cannot write summary csv");
    csv_file << csv.rows.str();
}

std::vector<json> run_sweep(const NGramModel& model, const std::vector<DocumentRecord>& docs,
                            const ExperimentConfig& base_config,
                            const std::vector<double>& deltas,
                            const ClassifierRunConfig& classifier_config) {
    if (deltas.empty()) throw std::invalid_argument("sweep needs at least one delta");
    std::vector<json> rows;
    for (double delta : deltas) {
        ExperimentConfig config = base_config;
        config.watermark.scheme = Scheme::Soft;
        config.watermark.soft.delta = delta;
        const GenerationRun run = run_generation(model, docs, config);

        const std::vector<json> detections =
            run_detection(model.vocab(), run.pairs, config.watermark);
        std::vector<double> zs;
        long detected = 0, n = 0;
        for (const auto& row : detections) {
            if (row.at("side").get<std::string>() != "watermarked") continue;
            ++n;
            const double z = row.at("z").get<double>();
            zs.push_back(z);
            if (z >= 4.0) ++detected;
        }

        const ClassifierRunResult cls = run_classifier(run.pairs, classifier_config);

        json row;
        row["delta"] = delta;
        row["median_z"] = median(zs);
        row["frac_z_ge_4"] = n ? static_cast<double>(detected) / n : 0.0;
        row["accuracy"] = cls.metrics.accuracy;
        row["auc"] = cls.metrics.auc;
        rows.push_back(std::move(row));
    }
    return rows;
}

void save_json_lines(const std::string& path, const std::vector<json>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    for (const auto& row : rows) out << row.dump() << "\n";
}

std::vector<json> load_json_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read file: " + path);
    std::vector<json> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) rows.push_back(json::parse(line));
    }
    return rows;
}

void save_json_file(const std::string& path, const json& value) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << value.dump(2) << "\n";
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read file: " + path);
    json value;
    in >> value;
    return value;
}

} // namespace wmbench
