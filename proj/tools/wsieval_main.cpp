// Command-line surface: evaluation subcommands, run persistence and table
// rendering. See README.md for usage.

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wsieval/agreement.hpp"
#include "wsieval/claimeval.hpp"
#include "wsieval/corpus.hpp"
#include "wsieval/digest.hpp"
#include "wsieval/judge.hpp"
#include "wsieval/render.hpp"
#include "wsieval/textmetrics.hpp"

namespace {

using json = nlohmann::json;
using namespace wsieval;

constexpr const char* kVersion = "0.1.0";

// exit codes
constexpr int kOk = 0;
constexpr int kUsageError = 1;
constexpr int kLoadError = 2;
constexpr int kJudgeError = 3;
constexpr int kPartialFailure = 4;

struct CommonOpts {
    std::string dataset;
    std::string predictions;
    std::string judge_config;
    std::string out_dir = "out";
    std::string metrics = "precision,relevance";
    std::string format = "markdown";
    std::string fixture;
    std::string cache_dir;
    std::uint64_t seed = 0;
    int concurrency = 1;
    bool mock_judge = false;
    bool lenient = false;
    bool allow_partial = false;
};

std::string iso_now() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
    return buf;
}

// Counts backend invocations when no cache wrapper is in play.
class CountingBackend : public ChatBackend {
public:
    explicit CountingBackend(std::shared_ptr<ChatBackend> inner) : inner_(std::move(inner)) {}
    std::string complete(const ChatRequest& request) override {
        ++calls_;
        return inner_->complete(request);
    }
    std::string id() const override { return inner_->id(); }
    long long calls() const { return calls_; }

private:
    std::shared_ptr<ChatBackend> inner_;
    std::atomic<long long> calls_{0};
};

struct JudgeStack {
    std::shared_ptr<ClaimJudge> judge;
    std::shared_ptr<CachingChatBackend> cache;      // may be null
    std::shared_ptr<CountingBackend> counter;       // may be null
    int concurrency = 1;

    long long judge_calls() const {
        if (cache) return cache->stats().remote_calls.load();
        if (counter) return counter->calls();
        return 0;
    }
    long long cache_hits() const { return cache ? cache->stats().cache_hits.load() : 0; }
};

JudgeStack make_judge(const CommonOpts& opts) {
    JudgeStack stack;
    std::shared_ptr<ChatBackend> backend;
    std::string model = "mock-judge";
    double temperature = 0.0;
    int max_attempts = 3;
    std::filesystem::path prompt_dir;
    std::filesystem::path cache_dir = opts.cache_dir;
    stack.concurrency = opts.concurrency;

    if (!opts.fixture.empty()) {
        backend = std::make_shared<FixtureChatBackend>(opts.fixture);
        model = backend->id();
    } else if (opts.mock_judge) {
        backend = std::make_shared<MockChatBackend>();
    } else {
        if (opts.judge_config.empty())
            throw JudgeError("one of --judge-config, --mock-judge or --fixture is required");
        JudgeConfig config = load_judge_config(opts.judge_config);
        model = config.model;
        temperature = config.temperature;
        max_attempts = config.max_attempts;
        prompt_dir = config.prompt_dir;
        if (cache_dir.empty()) cache_dir = config.cache_dir;
        if (opts.concurrency == 1) stack.concurrency = config.concurrency;
        backend = std::make_shared<HttpChatBackend>(config);
    }

    if (!cache_dir.empty()) {
        stack.cache = std::make_shared<CachingChatBackend>(backend, cache_dir);
        backend = stack.cache;
    } else {
        stack.counter = std::make_shared<CountingBackend>(backend);
        backend = stack.counter;
    }

    PromptTemplates templates =
        prompt_dir.empty() ? PromptTemplates::builtin() : PromptTemplates::load(prompt_dir);
    stack.judge = std::make_shared<ClaimJudge>(backend, std::move(templates), model, temperature,
                                               max_attempts);
    return stack;
}

TableFormat parse_format(const std::string& s) {
    if (s == "csv") return TableFormat::Csv;
    if (s == "json") return TableFormat::Json;
    return TableFormat::Markdown;
}

// Writes a run manifest; called on success and on failure alike.
class ManifestWriter {
public:
    ManifestWriter(const CommonOpts& opts, const std::string& command) {
        manifest_["command"] = command;
        manifest_["tool_version"] = kVersion;
        manifest_["started_at"] = iso_now();
        manifest_["config"] = {{"dataset", opts.dataset},
                               {"predictions", opts.predictions},
                               {"judge_config", opts.judge_config},
                               {"metrics", opts.metrics},
                               {"out", opts.out_dir},
                               {"seed", opts.seed},
                               {"concurrency", opts.concurrency},
                               {"mock_judge", opts.mock_judge},
                               {"fixture", opts.fixture},
                               {"cache_dir", opts.cache_dir},
                               {"lenient", opts.lenient},
                               {"allow_partial", opts.allow_partial},
                               {"format", opts.format}};
        out_dir_ = opts.out_dir;
    }

    void write_output(const std::string& name, const std::string& content) {
        std::filesystem::create_directories(out_dir_);
        std::filesystem::path path = std::filesystem::path(out_dir_) / name;
        std::ofstream out(path, std::ios::binary);
        out << content;
        outputs_.push_back({{"file", name}, {"sha256", sha256_hex(content)}});
    }

    void set_count(const std::string& key, long long value) { counts_[key] = value; }
    void set_status(const std::string& status) { manifest_["status"] = status; }

    ~ManifestWriter() {
        manifest_["ended_at"] = iso_now();
        manifest_["counts"] = counts_;
        manifest_["outputs"] = outputs_;
        if (!manifest_.contains("status")) manifest_["status"] = "failed";
        std::error_code ec;
        std::filesystem::create_directories(out_dir_, ec);
        std::ofstream out(std::filesystem::path(out_dir_) / "manifest.json");
        out << manifest_.dump(2) << '\n';
    }

private:
    json manifest_ = json::object();
    json counts_ = json::object();
    json outputs_ = json::array();
    std::string out_dir_;
};

struct LoadedCorpus {
    std::vector<VqaRecord> records;
    std::vector<Prediction> predictions;
    std::vector<EvalPair> pairs;
    PairingReport pairing;
    std::string model_name;
};

LoadedCorpus load_corpus(const CommonOpts& opts) {
    LoadedCorpus c;
    LoadReport dataset_report, prediction_report;
    c.records = load_dataset(opts.dataset, !opts.lenient, &dataset_report);
    c.predictions = load_predictions(opts.predictions, !opts.lenient, &prediction_report);
    c.pairs = pair_predictions(c.records, c.predictions, &c.pairing);
    if (!c.predictions.empty()) c.model_name = c.predictions.front().model_name;
    return c;
}

std::string pairing_report_text(const PairingReport& report) {
    std::ostringstream out;
    out << "unmatched records: " << report.unmatched_record_ids.size() << '\n';
    for (const auto& id : report.unmatched_record_ids) out << "  " << id << '\n';
    out << "orphan predictions: " << report.orphan_prediction_ids.size() << '\n';
    for (const auto& id : report.orphan_prediction_ids) out << "  " << id << '\n';
    return out.str();
}

std::vector<ScoredItem> scored_items_from_results(const std::vector<MetricResult>& results,
                                                  const std::vector<VqaRecord>& records,
                                                  const std::string& model) {
    std::map<std::string, const VqaRecord*> by_id;
    for (const auto& r : records) by_id[r.id] = &r;
    std::vector<ScoredItem> items;
    for (const auto& result : results) {
        auto it = by_id.find(result.pair_id);
        if (it == by_id.end()) continue;
        items.push_back({model, it->second->capability, it->second->task,
                         it->second->question_type, std::string(to_string(result.metric)),
                         result.value});
    }
    return items;
}

int cmd_eval_open(const CommonOpts& opts) {
    ManifestWriter manifest(opts, "eval-open");
    LoadedCorpus corpus = load_corpus(opts);
    manifest.write_output("pairing_report.txt", pairing_report_text(corpus.pairing));
    if (!opts.lenient && !corpus.pairing.unmatched_record_ids.empty()) {
        std::cerr << "error: " << corpus.pairing.unmatched_record_ids.size()
                  << " records have no prediction (strict mode)\n";
        return kLoadError;
    }

    std::vector<EvalPair> open_pairs;
    for (const auto& p : corpus.pairs)
        if (p.record.question_type == QuestionType::Open) open_pairs.push_back(p);

    std::vector<ClaimMetric> metrics;
    {
        std::stringstream ss(opts.metrics);
        std::string item;
        while (std::getline(ss, item, ',')) {
            auto m = claim_metric_from_string(item);
            if (!m) throw std::runtime_error("unknown metric: " + item);
            metrics.push_back(*m);
        }
    }

    JudgeStack stack = make_judge(opts);
    OpenSetResult result = evaluate_open_set(open_pairs, metrics, *stack.judge, stack.concurrency);

    manifest.write_output("results.jsonl", metric_results_to_jsonl(result.results));
    if (!result.failures.empty()) {
        std::ostringstream fail;
        for (const auto& f : result.failures)
            fail << f.pair_id << '\t' << to_string(f.metric) << '\t' << f.error << '\n';
        manifest.write_output("failures.tsv", fail.str());
    }

    auto items = scored_items_from_results(result.results, corpus.records, corpus.model_name);
    if (!items.empty()) {
        auto by_cap = aggregate(items, Grouping::Capability);
        auto by_task = aggregate(items, Grouping::Task);
        TableFormat fmt = parse_format(opts.format);
        manifest.write_output("table_by_capability." + opts.format, render_table(by_cap, fmt));
        manifest.write_output("table_by_task." + opts.format, render_table(by_task, fmt));
        std::cout << render_table(by_cap, TableFormat::Markdown);
    }

    manifest.set_count("pairs", static_cast<long long>(open_pairs.size()));
    manifest.set_count("results", static_cast<long long>(result.results.size()));
    manifest.set_count("failures", static_cast<long long>(result.failures.size()));
    manifest.set_count("judge_calls", stack.judge_calls());
    manifest.set_count("cache_hits", stack.cache_hits());

    if (!result.failures.empty() && !opts.allow_partial) {
        std::cerr << "error: " << result.failures.size() << " pair evaluations failed\n";
        manifest.set_status("partial_failure");
        return kPartialFailure;
    }
    manifest.set_status("ok");
    return kOk;
}

int cmd_eval_closed(const CommonOpts& opts) {
    ManifestWriter manifest(opts, "eval-closed");
    LoadedCorpus corpus = load_corpus(opts);
    manifest.write_output("pairing_report.txt", pairing_report_text(corpus.pairing));

    std::vector<ScoredItem> items;
    std::ostringstream detail;
    std::vector<int> scores;
    for (const auto& pair : corpus.pairs) {
        if (pair.record.question_type != QuestionType::Closed) continue;
        ClosedScore s = score_closed_ended(pair);
        scores.push_back(s.score);
        items.push_back({corpus.model_name, pair.record.capability, pair.record.task,
                         pair.record.question_type, "Acc", static_cast<double>(s.score)});
        detail << pair.record.id << '\t' << (s.parsed_letter ? *s.parsed_letter : "-") << '\t'
               << (pair.record.correct_letter ? *pair.record.correct_letter : "-") << '\t'
               << s.score << '\n';
    }
    manifest.write_output("closed_scores.tsv", detail.str());
    manifest.set_count("pairs", static_cast<long long>(scores.size()));
    if (!scores.empty()) {
        auto by_cap = aggregate(items, Grouping::Capability);
        TableFormat fmt = parse_format(opts.format);
        manifest.write_output("accuracy_by_capability." + opts.format, render_table(by_cap, fmt));
        std::cout << "accuracy: " << format_score(accuracy(scores)) << '\n'
                  << render_table(by_cap, TableFormat::Markdown);
    }
    manifest.set_status("ok");
    return kOk;
}

std::vector<EvalPair> report_pairs(const LoadedCorpus& corpus) {
    std::vector<EvalPair> out;
    for (const auto& p : corpus.pairs)
        if (p.record.task == Task::ReportGeneration) out.push_back(p);
    return out;
}

int cmd_eval_nlu(const CommonOpts& opts) {
    ManifestWriter manifest(opts, "eval-nlu");
    LoadedCorpus corpus = load_corpus(opts);
    auto pairs = report_pairs(corpus);
    if (pairs.empty()) {
        std::cerr << "error: no ReportGeneration pairs in input\n";
        return kLoadError;
    }
    std::vector<std::pair<std::string, std::string>> texts;
    for (const auto& p : pairs) texts.emplace_back(p.prediction.response, p.record.ground_truth);
    NluConfig config;
    NluScores scores = nlu_suite(texts, config);
    manifest.write_output("nlu.json", nlu_scores_to_json(scores, config).dump(2) + "\n");
    manifest.write_output("nlu.csv", nlu_scores_to_csv(scores, config));
    std::cout << nlu_scores_to_csv(scores, config);
    manifest.set_count("pairs", static_cast<long long>(pairs.size()));
    manifest.set_status("ok");
    return kOk;
}

int cmd_eval_report(const CommonOpts& opts) {
    ManifestWriter manifest(opts, "eval-report");
    LoadedCorpus corpus = load_corpus(opts);
    auto pairs = report_pairs(corpus);
    if (pairs.empty()) {
        std::cerr << "error: no ReportGeneration pairs in input\n";
        return kLoadError;
    }

    // Group by model (multiple prediction files may be concatenated).
    std::map<std::string, std::vector<EvalPair>> by_model;
    for (const auto& p : pairs) by_model[p.prediction.model_name].push_back(p);

    JudgeStack stack = make_judge(opts);
    NluConfig config;
    std::ostringstream md, csv;
    md << "| Model | BLEU-1 | BLEU-2 | BLEU-3 | BLEU-4 | ROUGE-L | METEOR | WSI-Precision | "
          "WSI-Relevance |\n| --- | --- | --- | --- | --- | --- | --- | --- | --- |\n";
    csv << "Model,BLEU-1,BLEU-2,BLEU-3,BLEU-4,ROUGE-L,METEOR,WSI-Precision,WSI-Relevance\n";
    std::size_t failures = 0;
    std::vector<MetricResult> all_results;
    for (const auto& [model, model_pairs] : by_model) {
        std::vector<std::pair<std::string, std::string>> texts;
        for (const auto& p : model_pairs)
            texts.emplace_back(p.prediction.response, p.record.ground_truth);
        NluScores nlu = nlu_suite(texts, config);

        OpenSetResult claims = evaluate_open_set(
            model_pairs, {ClaimMetric::WsiPrecision, ClaimMetric::WsiRelevance}, *stack.judge,
            stack.concurrency);
        failures += claims.failures.size();
        double prec_sum = 0, rel_sum = 0;
        std::size_t prec_n = 0, rel_n = 0;
        for (const auto& r : claims.results) {
            if (r.metric == ClaimMetric::WsiPrecision) {
                prec_sum += r.value;
                ++prec_n;
            } else {
                rel_sum += r.value;
                ++rel_n;
            }
            all_results.push_back(r);
        }
        double prec = prec_n ? prec_sum / static_cast<double>(prec_n) : 0.0;
        double rel = rel_n ? rel_sum / static_cast<double>(rel_n) : 0.0;

        auto row = {nlu.bleu1, nlu.bleu2, nlu.bleu3, nlu.bleu4, nlu.rouge_l_f, nlu.meteor, prec, rel};
        md << "| " << model;
        csv << model;
        for (double v : row) {
            md << " | " << format_score(v);
            csv << ',' << format_score(v);
        }
        md << " |\n";
        csv << '\n';
    }

    manifest.write_output("report_table.md", md.str());
    manifest.write_output("report_table.csv", csv.str());
    manifest.write_output("results.jsonl", metric_results_to_jsonl(all_results));
    std::cout << md.str();
    manifest.set_count("pairs", static_cast<long long>(pairs.size()));
    manifest.set_count("failures", static_cast<long long>(failures));
    manifest.set_count("judge_calls", stack.judge_calls());
    manifest.set_count("cache_hits", stack.cache_hits());
    if (failures > 0 && !opts.allow_partial) {
        manifest.set_status("partial_failure");
        return kPartialFailure;
    }
    manifest.set_status("ok");
    return kOk;
}

int cmd_sample(const CommonOpts& opts, double fraction, std::size_t min_per_stratum) {
    ManifestWriter manifest(opts, "sample");
    LoadedCorpus corpus = load_corpus(opts);
    auto sampled = stratified_sample(corpus.pairs, fraction, min_per_stratum, opts.seed);

    std::vector<VqaRecord> records;
    std::ostringstream preds;
    for (const auto& p : sampled) {
        records.push_back(p.record);
        preds << json{{"record_id", p.prediction.record_id},
                      {"model_name", p.prediction.model_name},
                      {"response", p.prediction.response}}
                     .dump()
              << '\n';
    }
    std::filesystem::create_directories(opts.out_dir);
    save_dataset(std::filesystem::path(opts.out_dir) / "sample_dataset.jsonl", records);
    manifest.write_output("sample_predictions.jsonl", preds.str());
    manifest.set_count("sampled", static_cast<long long>(sampled.size()));
    manifest.set_count("total", static_cast<long long>(corpus.pairs.size()));
    manifest.set_status("ok");
    std::cout << "sampled " << sampled.size() << " of " << corpus.pairs.size() << " pairs\n";
    return kOk;
}

int cmd_annotate(const CommonOpts& opts, const std::string& rater, const std::string& annotations,
                 const std::string& script) {
    ManifestWriter manifest(opts, "annotate");
    LoadedCorpus corpus = load_corpus(opts);
    std::ifstream script_in;
    if (!script.empty()) {
        script_in.open(script);
        if (!script_in) throw std::runtime_error("cannot open script file: " + script);
    }
    std::istream& in = script.empty() ? std::cin : script_in;
    auto session = annotate(corpus.pairs, rater, annotations, in, std::cout);
    manifest.set_count("annotations", static_cast<long long>(session.size()));
    manifest.set_status("ok");
    std::cout << "\nrecorded " << session.size() << " annotations\n";
    return kOk;
}

int cmd_agreement(const CommonOpts& opts, const std::string& results_file,
                  const std::string& annotations_file) {
    ManifestWriter manifest(opts, "agreement");
    auto results = metric_results_from_jsonl(results_file);
    auto annotations = load_annotations(annotations_file);
    AgreementReport report = validate_metrics(results, annotations);
    manifest.write_output("agreement.md", agreement_report_to_markdown(report));
    manifest.write_output("agreement.csv", agreement_report_to_csv(report));
    std::cout << agreement_report_to_markdown(report);
    manifest.set_count("automated_results", static_cast<long long>(results.size()));
    manifest.set_count("annotations", static_cast<long long>(annotations.size()));
    manifest.set_status("ok");
    return kOk;
}

int cmd_render(const CommonOpts& opts, const std::string& results_file, const std::string& group,
               bool mark_best) {
    ManifestWriter manifest(opts, "render");
    auto records = load_dataset(opts.dataset, !opts.lenient);
    auto results = metric_results_from_jsonl(results_file);
    std::string model = "model";
    if (!opts.predictions.empty()) {
        auto preds = load_predictions(opts.predictions, false);
        if (!preds.empty()) model = preds.front().model_name;
    }
    auto items = scored_items_from_results(results, records, model);
    auto table = aggregate(items, group == "task" ? Grouping::Task : Grouping::Capability);
    std::string text = render_table(table, parse_format(opts.format), mark_best);
    manifest.write_output("table." + opts.format, text);
    std::cout << text;
    manifest.set_status("ok");
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Claims-based evaluation toolkit for pathology VQA and report generation"};
    app.require_subcommand(1);

    CommonOpts opts;
    double fraction = 0.02;
    std::size_t min_per_stratum = 1;
    std::string rater = "rater1";
    std::string annotations = "annotations.jsonl";
    std::string script;
    std::string results_file;
    std::string group = "capability";
    bool mark_best = false;

    auto add_common = [&](CLI::App* cmd, bool needs_data) {
        if (needs_data) {
            cmd->add_option("--dataset", opts.dataset, "benchmark dataset (JSONL)")->required();
            cmd->add_option("--predictions", opts.predictions, "model predictions (JSONL)");
        } else {
            cmd->add_option("--dataset", opts.dataset, "benchmark dataset (JSONL)");
            cmd->add_option("--predictions", opts.predictions, "model predictions (JSONL)");
        }
        cmd->add_option("--judge-config", opts.judge_config, "judge config JSON");
        cmd->add_option("--metrics", opts.metrics, "comma list: precision,relevance");
        cmd->add_option("--out", opts.out_dir, "output directory");
        cmd->add_option("--seed", opts.seed, "RNG seed (recorded in the manifest)");
        cmd->add_option("--concurrency", opts.concurrency, "judge concurrency bound");
        cmd->add_option("--fixture", opts.fixture, "replay-fixture judge file");
        cmd->add_option("--cache-dir", opts.cache_dir, "judge response cache directory");
        cmd->add_option("--format", opts.format, "table format: markdown|csv|json");
        cmd->add_flag("--mock-judge", opts.mock_judge, "use the deterministic mock judge");
        cmd->add_flag("--lenient", opts.lenient, "skip invalid records instead of aborting");
        cmd->add_flag("--allow-partial", opts.allow_partial, "exit 0 despite failed pairs");
    };

    auto* eval_open = app.add_subcommand("eval-open", "claim metrics over open-ended pairs");
    add_common(eval_open, true);
    auto* eval_closed = app.add_subcommand("eval-closed", "accuracy over closed-ended pairs");
    add_common(eval_closed, true);
    auto* eval_report = app.add_subcommand("eval-report", "NLU + claim metrics for report generation");
    add_common(eval_report, true);
    auto* eval_nlu = app.add_subcommand("eval-nlu", "BLEU/ROUGE-L/METEOR for report generation");
    add_common(eval_nlu, true);

    auto* sample = app.add_subcommand("sample", "stratified sample of pairs by capability");
    add_common(sample, true);
    sample->add_option("--fraction", fraction, "sampling fraction in (0,1]");
    sample->add_option("--min-per-stratum", min_per_stratum, "minimum pairs per stratum");

    auto* annotate_cmd = app.add_subcommand("annotate", "terminal annotation workflow");
    add_common(annotate_cmd, true);
    annotate_cmd->add_option("--rater", rater, "rater identifier");
    annotate_cmd->add_option("--annotations", annotations, "annotation file (JSONL, append-only)");
    annotate_cmd->add_option("--script", script, "scripted input file instead of stdin");

    auto* agreement_cmd = app.add_subcommand("agreement", "automated-vs-human agreement report");
    add_common(agreement_cmd, false);
    agreement_cmd->add_option("--results", results_file, "metric results JSONL")->required();
    agreement_cmd->add_option("--annotations", annotations, "annotation file (JSONL)")->required();

    auto* render_cmd = app.add_subcommand("render", "re-render tables from a results file");
    add_common(render_cmd, true);
    render_cmd->add_option("--results", results_file, "metric results JSONL")->required();
    render_cmd->add_option("--group", group, "grouping: capability|task");
    render_cmd->add_flag("--mark-best", mark_best, "mark the best value per column");

    CLI11_PARSE(app, argc, argv);

    try {
        if (eval_open->parsed()) return cmd_eval_open(opts);
        if (eval_closed->parsed()) return cmd_eval_closed(opts);
        if (eval_report->parsed()) return cmd_eval_report(opts);
        if (eval_nlu->parsed()) return cmd_eval_nlu(opts);
        if (sample->parsed()) return cmd_sample(opts, fraction, min_per_stratum);
        if (annotate_cmd->parsed()) return cmd_annotate(opts, rater, annotations, script);
        if (agreement_cmd->parsed()) return cmd_agreement(opts, results_file, annotations);
        if (render_cmd->parsed()) return cmd_render(opts, results_file, group, mark_best);
    } catch (const LoadError& e) {
        std::cerr << "load error: " << e.what() << '\n';
        return kLoadError;
    } catch (const JudgeError& e) {
        std::cerr << "judge error: " << e.what() << '\n';
        return kJudgeError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsageError;
    }
    return kUsageError;
}
