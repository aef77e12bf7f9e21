// wmbench: embed, detect and evaluate LLM watermarks on a desk-scale toy
// language model. Subcommands chain through line-delimited JSON artifacts:
//   ingest -> generate -> detect / classify / judge -> report, plus sweep.
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <cstdio>
#include <iostream>
#include <memory>
#include <numeric>

#include "CLI11.hpp"

#include "wmbench/pipeline.hpp"

#ifndef WMBENCH_DEFAULT_TEMPLATE_DIR
#define WMBENCH_DEFAULT_TEMPLATE_DIR "data/templates"
#endif

using namespace wmbench;

namespace {

struct WatermarkOptions {
    std::string scheme = "soft";
    double gamma = 0.25;
    double delta = 4.0;
    uint64_t key = 99170236041ULL;
    int context_width = 4;
    bool left_hash = false;
    uint64_t exp_key = 42;
    int exp_n = 256;
    double edit_penalty = 1.0;

    WatermarkSpec spec() const {
        WatermarkSpec s;
        s.scheme = parse_scheme(scheme);
        s.soft.gamma = gamma;
        s.soft.delta = delta;
        s.soft.key = key;
        s.soft.context_width = context_width;
        s.soft.scheme = left_hash ? HashScheme::LeftHash : HashScheme::SelfHash;
        s.exp_key = exp_key;
        s.exp_n = exp_n;
        s.edit_penalty = edit_penalty;
        return s;
    }

    void attach(CLI::App* cmd) {
        cmd->add_option("--scheme", scheme, "Watermark scheme: soft, exp or none")
            ->check(CLI::IsMember({"soft", "exp", "none"}));
        cmd->add_option("--gamma", gamma, "Soft watermark green fraction");
        cmd->add_option("--delta", delta, "Soft watermark logit bias");
        cmd->add_option("--key", key, "Soft watermark secret key");
        cmd->add_option("--context-width", context_width, "Soft watermark hashing window");
        cmd->add_flag("--left-hash", left_hash, "Use the LeftHash scheme instead of SelfHash");
        cmd->add_option("--exp-key", exp_key, "EXP watermark secret key");
        cmd->add_option("--exp-n", exp_n, "EXP watermark key sequence length");
        cmd->add_option("--edit-penalty", edit_penalty, "EXP alignment insert/delete penalty");
    }
};

int run(int argc, char** argv) {
    CLI::App app{"wmbench: watermark embedding, detection and black-box evaluation"};
    app.require_subcommand(1);
    app.set_config("--config");

    // ---- ingest ----
    auto* ingest = app.add_subcommand("ingest", "Ingest corpus files into document records");
    std::vector<std::string> ingest_inputs;
    std::string ingest_tag = "default";
    std::string ingest_out = "documents.jsonl";
    ingest->add_option("--input", ingest_inputs, "Input text files (one document per line)")
        ->required();
    ingest->add_option("--tag", ingest_tag, "Dataset tag for these documents");
    ingest->add_option("--out", ingest_out, "Output document record file");

    // ---- generate ----
    auto* generate = app.add_subcommand("generate", "Generate unwatermarked/watermarked pairs");
    std::string gen_documents = "documents.jsonl";
    std::string gen_corpus;
    std::string gen_out = "pairs.jsonl";
    int gen_order = 3;
    double gen_alpha = 0.1;
    int gen_length = 200;
    double gen_temperature = 1.0;
    uint64_t gen_seed = 1;
    int gen_limit = 0;
    int gen_jobs = 2;
    WatermarkOptions gen_wm;
    generate->add_option("--documents", gen_documents, "Document record file");
    generate->add_option("--corpus", gen_corpus, "Training corpus for the toy model")->required();
    generate->add_option("--order", gen_order, "n-gram order");
    generate->add_option("--alpha", gen_alpha, "Additive smoothing constant");
    generate->add_option("--length", gen_length, "Completion length in tokens");
    generate->add_option("--temperature", gen_temperature, "Sampling temperature");
    generate->add_option("--seed", gen_seed, "Master seed");
    generate->add_option("--limit", gen_limit, "Use only the first N documents (0 = all)");
    generate->add_option("--jobs", gen_jobs, "Generation worker threads");
    generate->add_option("--out", gen_out, "Output pair record file");
    gen_wm.attach(generate);

    // ---- detect ----
    auto* detect = app.add_subcommand("detect", "Run watermark detection on pair records");
    std::string det_pairs = "pairs.jsonl";
    std::string det_corpus;
    std::string det_out = "detections.jsonl";
    int det_order = 3;
    double det_alpha = 0.1;
    int det_resamples = 99;
    int det_jobs = 2;
    WatermarkOptions det_wm;
    detect->add_option("--pairs", det_pairs, "Pair record file");
    detect->add_option("--corpus", det_corpus, "Corpus used at generation (fixes the vocabulary)")
        ->required();
    detect->add_option("--order", det_order, "n-gram order used at generation");
    detect->add_option("--alpha", det_alpha, "Smoothing constant used at generation");
    detect->add_option("--resamples", det_resamples, "EXP permutation resamples (>= 99)");
    detect->add_option("--jobs", det_jobs, "Detection worker threads");
    detect->add_option("--out", det_out, "Output detection row file");
    det_wm.attach(detect);

    // ---- classify ----
    auto* classify = app.add_subcommand("classify", "Train/evaluate the watermark classifier");
    std::string cls_pairs = "pairs.jsonl";
    std::string cls_out = "metrics.json";
    std::string cls_features = "hashed";
    std::string cls_fixtures;
    std::string cls_mode = "kfold";
    std::string cls_train_tag;
    std::vector<int> cls_hidden = {64, 32};
    int cls_dim = 256;
    int cls_k = 5;
    uint64_t cls_seed = 7;
    bool cls_grid = false;
    bool cls_logistic = false;
    double cls_l2 = 1e-3;
    double cls_lr = 2e-4;
    double cls_wd = 2e-3;
    int cls_batch = 50;
    int cls_epochs = 150;
    bool cls_no_shuffle = false;
    classify->add_option("--pairs", cls_pairs, "Pair record file");
    classify->add_option("--features", cls_features, "Feature source: hashed or external")
        ->check(CLI::IsMember({"hashed", "external"}));
    classify->add_option("--fixtures", cls_fixtures, "Embedding fixture file (external source)");
    classify->add_option("--dim", cls_dim, "Hashed-feature dimension");
    classify->add_option("--hidden", cls_hidden, "Hidden layer sizes");
    classify->add_option("--mode", cls_mode, "Evaluation mode: kfold or cross-tag")
        ->check(CLI::IsMember({"kfold", "cross-tag"}));
    classify->add_option("--train-tag", cls_train_tag, "Training tag for cross-tag mode");
    classify->add_option("--k", cls_k, "Cross-validation folds");
    classify->add_option("--seed", cls_seed, "Classifier seed");
    classify->add_flag("--grid", cls_grid, "Run the full 54-point hyperparameter grid first");
    classify->add_flag("--logistic", cls_logistic, "Logistic-regression baseline");
    classify->add_option("--l2", cls_l2, "Logistic L2 strength");
    classify->add_option("--lr", cls_lr, "Learning rate");
    classify->add_option("--wd", cls_wd, "Weight decay");
    classify->add_option("--batch", cls_batch, "Batch size");
    classify->add_option("--epochs", cls_epochs, "Training epochs");
    classify->add_flag("--no-shuffle", cls_no_shuffle, "Disable epoch shuffling");
    classify->add_option("--out", cls_out, "Output metrics file");

    // ---- judge ----
    auto* judge = app.add_subcommand("judge", "Run the LLM-judger harness on pair records");
    std::string jud_pairs = "pairs.jsonl";
    std::string jud_template = "categorical";
    std::string jud_client = "heuristic";
    std::string jud_fixtures;
    std::string jud_base_url;
    std::string jud_model = "judger";
    std::string jud_templates_dir = WMBENCH_DEFAULT_TEMPLATE_DIR;
    std::string jud_out = "verdicts.jsonl";
    std::string jud_summary = "judging.json";
    int jud_retries = 3;
    int jud_in_flight = 4;
    uint64_t jud_seed = 11;
    judge->add_option("--pairs", jud_pairs, "Pair record file");
    judge->add_option("--template", jud_template, "Prompt template: categorical or simple")
        ->check(CLI::IsMember({"categorical", "simple"}));
    judge->add_option("--client", jud_client, "Judger client: heuristic, fixture or http")
        ->check(CLI::IsMember({"heuristic", "fixture", "http"}));
    judge->add_option("--fixtures", jud_fixtures, "Judger fixture file (fixture client)");
    judge->add_option("--base-url", jud_base_url, "Judger service base URL (http client)");
    judge->add_option("--model", jud_model, "Judger model name (http client)");
    judge->add_option("--templates", jud_templates_dir, "Prompt template directory");
    judge->add_option("--max-retries", jud_retries, "Parse retries per pair");
    judge->add_option("--in-flight", jud_in_flight, "Concurrent judging requests");
    judge->add_option("--seed", jud_seed, "Order-randomization seed");
    judge->add_option("--out", jud_out, "Output verdict record file");
    judge->add_option("--summary", jud_summary, "Output aggregate summary file");

    // ---- report ----
    auto* report = app.add_subcommand("report", "Render collected artifacts into a report");
    std::string rep_pairs, rep_detections, rep_metrics, rep_judging, rep_sweep;
    std::string rep_out_dir = "reports";
    bool rep_timing = false;
    report->add_option("--pairs", rep_pairs, "Pair record file");
    report->add_option("--detections", rep_detections, "Detection row file");
    report->add_option("--metrics", rep_metrics, "Classifier metrics file");
    report->add_option("--judging", rep_judging, "Judging summary file");
    report->add_option("--sweep", rep_sweep, "Sweep row file");
    report->add_option("--out-dir", rep_out_dir, "Report output directory");
    report->add_flag("--include-timing", rep_timing,
                     "Include wall-time statistics (non-deterministic across runs)");

    // ---- sweep ----
    auto* sweep = app.add_subcommand("sweep", "Strength sweep over soft-watermark deltas");
    std::string swp_documents = "documents.jsonl";
    std::string swp_corpus;
    std::string swp_out = "sweep.jsonl";
    std::vector<double> swp_deltas = {2.0, 4.0, 8.0};
    int swp_order = 3;
    double swp_alpha = 0.1;
    int swp_length = 200;
    int swp_limit = 0;
    uint64_t swp_seed = 1;
    int swp_dim = 256;
    std::vector<int> swp_hidden = {64, 32};
    int swp_epochs = 150;
    sweep->add_option("--documents", swp_documents, "Document record file");
    sweep->add_option("--corpus", swp_corpus, "Training corpus for the toy model")->required();
    sweep->add_option("--deltas", swp_deltas, "Delta values to sweep");
    sweep->add_option("--order", swp_order, "n-gram order");
    sweep->add_option("--alpha", swp_alpha, "Additive smoothing constant");
    sweep->add_option("--length", swp_length, "Completion length in tokens");
    sweep->add_option("--limit", swp_limit, "Use only the first N documents (0 = all)");
    sweep->add_option("--seed", swp_seed, "Master seed");
    sweep->add_option("--dim", swp_dim, "Hashed-feature dimension");
    sweep->add_option("--hidden", swp_hidden, "Classifier hidden layer sizes");
    sweep->add_option("--epochs", swp_epochs, "Classifier training epochs");
    sweep->add_option("--out", swp_out, "Output sweep row file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (ingest->parsed()) {
            const auto docs = ingest_files(ingest_inputs, ingest_tag);
            save_documents(ingest_out, docs);
            std::cout << "ingested " << docs.size() << " documents (tag " << ingest_tag
                      << ") -> " << ingest_out << "\n";
        } else if (generate->parsed()) {
            const NGramModel model = train_model_from_corpus(gen_corpus, gen_order, gen_alpha);
            std::vector<DocumentRecord> docs = load_documents(gen_documents);
            if (gen_limit > 0 && static_cast<size_t>(gen_limit) < docs.size()) {
                docs.resize(static_cast<size_t>(gen_limit));
            }
            ExperimentConfig config;
            config.model = {gen_corpus, gen_order, gen_alpha};
            config.watermark = gen_wm.spec();
            config.length = gen_length;
            config.temperature = gen_temperature;
            config.master_seed = gen_seed;
            const GenerationRun run = run_generation(model, docs, config, gen_jobs);
            save_pairs(gen_out, run.pairs);

            double unwm = 0.0, wm = 0.0;
            for (const auto& p : run.pairs) {
                unwm += p.wall_unwatermarked_s;
                wm += p.wall_watermarked_s;
            }
            const double n = std::max<double>(1.0, static_cast<double>(run.pairs.size()));
            std::printf("generated %zu pairs (%ld skipped) -> %s\n", run.pairs.size(),
                        run.skipped, gen_out.c_str());
            std::printf("mean wall time per completion: unwatermarked %.6fs, watermarked %.6fs "
                        "(ratio %.2fx)\n",
                        unwm / n, wm / n, (wm / n) / std::max(unwm / n, 1e-12));
        } else if (detect->parsed()) {
            const NGramModel model = train_model_from_corpus(det_corpus, det_order, det_alpha);
            const auto pairs = load_pairs(det_pairs);
            const auto rows =
                run_detection(model.vocab(), pairs, det_wm.spec(), det_resamples, det_jobs);
            save_json_lines(det_out, rows);
            std::cout << "detected " << rows.size() << " completions -> " << det_out << "\n";
        } else if (classify->parsed()) {
            const auto pairs = load_pairs(cls_pairs);
            ClassifierRunConfig config;
            config.features.source = cls_features == "external"
                                         ? FeatureConfig::Source::External
                                         : FeatureConfig::Source::HashedNgram;
            config.features.dim = cls_dim;
            config.fixture_path = cls_fixtures;
            config.hidden_sizes = cls_hidden;
            config.train.learning_rate = cls_lr;
            config.train.weight_decay = cls_wd;
            config.train.batch_size = cls_batch;
            config.train.epochs = cls_epochs;
            config.train.shuffle = !cls_no_shuffle;
            config.use_grid = cls_grid;
            config.logistic = cls_logistic;
            config.logistic_l2 = cls_l2;
            config.mode = cls_mode == "cross-tag" ? ClassifierRunConfig::Mode::CrossTag
                                                  : ClassifierRunConfig::Mode::PooledKFold;
            config.train_tag = cls_train_tag;
            config.k = cls_k;
            config.seed = cls_seed;
            const ClassifierRunResult result = run_classifier(pairs, config);
            save_json_file(cls_out, result.to_json());
            std::printf("classifier (%s): accuracy %.4f, auc %.4f -> %s\n",
                        result.mode.c_str(), result.metrics.accuracy, result.metrics.auc,
                        cls_out.c_str());
        } else if (judge->parsed()) {
            const auto pairs = load_pairs(jud_pairs);
            const JudgerTemplates templates = JudgerTemplates::load(jud_templates_dir);
            std::unique_ptr<JudgerClient> client;
            if (jud_client == "heuristic") {
                client = std::make_unique<HeuristicJudgerClient>(jud_seed);
            } else if (jud_client == "fixture") {
                if (jud_fixtures.empty()) {
                    throw CLI::ValidationError("--fixtures is required for the fixture client");
                }
                client = std::make_unique<FixtureJudgerClient>(jud_fixtures);
            } else {
                if (jud_base_url.empty()) {
                    throw CLI::ValidationError("--base-url is required for the http client");
                }
                client = std::make_unique<HttpJudgerClient>(jud_base_url, jud_model);
            }
            JudgingRunConfig config;
            config.kind = jud_template == "simple" ? TemplateKind::Simple
                                                   : TemplateKind::Categorical;
            config.max_retries = jud_retries;
            config.max_in_flight = jud_in_flight;
            config.seed = jud_seed;
            const JudgingRunResult result = run_judging(pairs, *client, templates, config);
            save_json_lines(jud_out, result.verdict_records);
            save_json_file(jud_summary, result.to_json());
            std::printf("judged %zu pairs (%ld unjudgeable, %ld skipped): unwatermarked %.1f%%, "
                        "watermarked %.1f%%, tie %.1f%%\n",
                        result.judged.size(), result.unjudgeable, result.skipped,
                        result.overall.pct_unwatermarked, result.overall.pct_watermarked,
                        result.overall.pct_tie);
        } else if (report->parsed()) {
            ReportInputs inputs;
            if (!rep_pairs.empty()) inputs.pairs = load_pairs(rep_pairs);
            if (!rep_detections.empty()) inputs.detections = load_json_lines(rep_detections);
            if (!rep_metrics.empty()) inputs.classifier_metrics = load_json_file(rep_metrics);
            if (!rep_judging.empty()) inputs.judging = load_json_file(rep_judging);
            if (!rep_sweep.empty()) inputs.sweep_rows = load_json_lines(rep_sweep);
            inputs.include_timing = rep_timing;
            write_report(inputs, rep_out_dir);
            std::cout << "report written to " << rep_out_dir << "/report.txt and "
                      << rep_out_dir << "/summary.csv\n";
        } else if (sweep->parsed()) {
            const NGramModel model = train_model_from_corpus(swp_corpus, swp_order, swp_alpha);
            std::vector<DocumentRecord> docs = load_documents(swp_documents);
            if (swp_limit > 0 && static_cast<size_t>(swp_limit) < docs.size()) {
                docs.resize(static_cast<size_t>(swp_limit));
            }
            ExperimentConfig config;
            config.model = {swp_corpus, swp_order, swp_alpha};
            config.length = swp_length;
            config.master_seed = swp_seed;
            ClassifierRunConfig cls;
            cls.features.dim = swp_dim;
            cls.hidden_sizes = swp_hidden;
            cls.train.epochs = swp_epochs;
            cls.seed = swp_seed;
            const auto rows = run_sweep(model, docs, config, swp_deltas, cls);
            save_json_lines(swp_out, rows);
            std::cout << "sweep over " << swp_deltas.size() << " deltas -> " << swp_out << "\n";
        }
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) { return run(argc, argv); }
