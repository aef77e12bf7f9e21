#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "wmbench/classifier.hpp"
#include "wmbench/features.hpp"
#include "wmbench/judger.hpp"
#include "wmbench/token_model.hpp"
#include "wmbench/watermark_exp.hpp"
#include "wmbench/watermark_soft.hpp"

namespace wmbench {

using nlohmann::json;

// ---------------------------------------------------------------- documents

struct DocumentRecord {
    std::string id;   // sha256(tag + text) prefix; stable across re-ingest
    std::string tag;  // dataset tag
    std::string text;
};

// First min(max_words, word_count) whitespace-delimited words, single-spaced.
// Throws on an empty (whitespace-only) document.
std::string splice_prompt(const std::string& document, int max_words = 50);

// One document per non-empty line of each file. Throws with the offending
// path if a file cannot be read.
std::vector<DocumentRecord> ingest_files(const std::vector<std::string>& paths,
                                         const std::string& tag);

// Line-delimited JSON persistence. save_documents merges by id into an
// existing file (idempotent re-ingest); load preserves file order.
void save_documents(const std::string& path, const std::vector<DocumentRecord>& docs);
std::vector<DocumentRecord> load_documents(const std::string& path);

// --------------------------------------------------------------- experiment

enum class Scheme { None, Soft, Exp };
std::string scheme_name(Scheme scheme);
Scheme parse_scheme(const std::string& name); // throws on unknown name

struct WatermarkSpec {
    Scheme scheme = Scheme::Soft;
    SoftWatermarkConfig soft;    // soft-scheme parameters
    uint64_t exp_key = 42;       // EXP watermark defaults: n=256, key=42
    int exp_n = 256;
    double edit_penalty = 1.0;

    json params_json() const; // exact parameter record stored with each pair
};

struct ModelSpec {
    std::string corpus_path;
    int order = 3;
    double alpha = 0.1;
};

struct ExperimentConfig {
    ModelSpec model;
    WatermarkSpec watermark;
    int length = 200;        // completion length in tokens
    double temperature = 1.0;
    uint64_t master_seed = 1;

    // Fingerprint of everything that determines generated content; pair ids
    // derive from it so identical configs reproduce identical ids.
    std::string fingerprint() const;
};

// The unit record of every experiment: one prompt, both completions.
struct GenerationPair {
    std::string id;
    std::string tag;
    std::string prompt;
    std::string unwatermarked;
    std::string watermarked;
    Scheme scheme = Scheme::Soft;
    json params;      // watermark parameters, recorded exactly
    uint64_t seed = 0; // per-pair seed fanned out from the master seed
    double wall_unwatermarked_s = 0.0;
    double wall_watermarked_s = 0.0;
};

json pair_to_json(const GenerationPair& pair);
GenerationPair pair_from_json(const json& j);
// Appends pairs whose ids are not already present (records are append-only).
void save_pairs(const std::string& path, const std::vector<GenerationPair>& pairs);
std::vector<GenerationPair> load_pairs(const std::string& path);

// Whitespace/lowercase tokenization of the corpus file, one sequence per line.
NGramModel train_model_from_corpus(const std::string& corpus_path, int order, double alpha);

// One pair per document: splice the prompt, complete it plain and
// watermarked, record wall time per completion. Documents whose generation
// fails are skipped and counted.
struct GenerationRun {
    std::vector<GenerationPair> pairs;
    long skipped = 0;
};
GenerationRun run_generation(const NGramModel& model, const std::vector<DocumentRecord>& docs,
                             const ExperimentConfig& config, int parallelism = 2);

// ---------------------------------------------------------------- detection

// Per-pair, per-side detection rows (flat records; key material never
// serialized, only key ids). Soft rows carry {T, green_count, z, p_value,
// gamma, delta, key_id}; EXP rows carry {observed_cost, p_value, n_resamples,
// n, key_id}.
std::vector<json> run_detection(const Vocabulary& vocab, const std::vector<GenerationPair>& pairs,
                                const WatermarkSpec& spec, int exp_resamples = 99,
                                int parallelism = 2);

// --------------------------------------------------------------- classifier

struct ClassifierRunConfig {
    enum class Mode { PooledKFold, CrossTag };

    FeatureConfig features;
    std::string fixture_path;           // external-source fixture store
    std::vector<int> hidden_sizes = kDefaultHiddenSizes;
    TrainConfig train;
    bool use_grid = false;              // run the 54-point grid search first
    bool logistic = false;              // logistic-regression baseline instead of the MLP
    double logistic_l2 = 1e-3;
    Mode mode = Mode::PooledKFold;
    std::string train_tag;              // CrossTag: the training dataset tag
    int k = 5;
    uint64_t seed = 0;
};

struct ClassifierRunResult {
    Metrics metrics;
    std::optional<GridSearchResult> grid;
    long n_samples = 0;
    std::string mode;

    json to_json() const;
};

// Labels each pair's completions (watermarked=1, unwatermarked=0), embeds
// them, and evaluates per the configured mode. CrossTag with a single tag in
// the input is an error.
ClassifierRunResult run_classifier(const std::vector<GenerationPair>& pairs,
                                   const ClassifierRunConfig& config);

// ------------------------------------------------------------------ judging

struct JudgingRunConfig {
    TemplateKind kind = TemplateKind::Categorical;
    int max_retries = 3;
    int max_in_flight = 4;
    uint64_t seed = 0;
};

struct JudgingRunResult {
    std::vector<JudgedPair> judged;
    std::vector<json> verdict_records; // {pair_id, template, assignment, choice, scores?, retries}
    long unjudgeable = 0;
    long skipped = 0; // pairs missing a completion
    PreferenceAggregate overall;
    std::map<std::string, PreferenceAggregate> by_tag;
    std::optional<CategoryAnalysis> categories;

    json to_json() const;
};

JudgingRunResult run_judging(const std::vector<GenerationPair>& pairs, JudgerClient& client,
                             const JudgerTemplates& templates, const JudgingRunConfig& config);

// ------------------------------------------------------------------- report

// Renders whatever artifacts are present; missing inputs produce explicit
// gaps. Output is byte-deterministic; wall-time statistics appear only when
// include_timing is set.
struct ReportInputs {
    std::optional<std::vector<GenerationPair>> pairs;
    std::optional<std::vector<json>> detections;
    std::optional<json> classifier_metrics;
    std::optional<json> judging;
    std::optional<std::vector<json>> sweep_rows;
    bool include_timing = false;
};

// Writes <out_dir>/report.txt and <out_dir>/summary.csv.
void write_report(const ReportInputs& inputs, const std::string& out_dir);

// ------------------------------------------------------------------- sweep

// Strength sweep over delta values: generates soft-watermarked pairs per
// delta, detects, and cross-validates the classifier. Returns one row per
// delta: {delta, median_z_watermarked, frac_z_ge4, accuracy, auc}.
std::vector<json> run_sweep(const NGramModel& model, const std::vector<DocumentRecord>& docs,
                            const ExperimentConfig& base_config,
                            const std::vector<double>& deltas,
                            const ClassifierRunConfig& classifier_config);

// JSONL helpers shared by the CLI.
void save_json_lines(const std::string& path, const std::vector<json>& rows);
std::vector<json> load_json_lines(const std::string& path);
void save_json_file(const std::string& path, const json& value);
json load_json_file(const std::string& path);

} // namespace wmbench
