// Acceptance gate: one pass/fail line per criterion, exit 0 only if all pass.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "wsieval/agreement.hpp"
#include "wsieval/claimeval.hpp"
#include "wsieval/corpus.hpp"
#include "wsieval/judge.hpp"
#include "wsieval/render.hpp"
#include "wsieval/textmetrics.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace wsieval;

namespace {

const fs::path kFixtures = WSIEVAL_FIXTURES_DIR;
const std::string kCli = WSIEVAL_CLI_PATH;

int g_failures = 0;

void report(const std::string& name, bool ok, const std::string& detail = "") {
    std::cout << (ok ? "PASS" : "FAIL") << "  " << name;
    if (!ok && !detail.empty()) std::cout << "  (" << detail << ")";
    std::cout << "\n";
    if (!ok) ++g_failures;
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int run_cli(const std::string& args) {
    std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return status == -1 ? -1 : (WIFEXITED(status) ? WEXITSTATUS(status) : -1);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path fresh_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("wsieval_accept_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// --- criteria -------------------------------------------------------------

void rubric_mean_exactness() {
    auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1234);
    const int kTenths[4] = {0, 3, 7, 10};
    bool ok = true;
    std::string detail;
    for (int trial = 0; trial < 1000 && ok; ++trial) {
        std::size_t n = 1 + rng() % 64;
        std::vector<RubricScore> scores;
        std::vector<int> tenths;
        for (std::size_t i = 0; i < n; ++i) {
            int t = kTenths[rng() % 4];
            tenths.push_back(t);
            scores.push_back(*RubricScore::from_tenths(t));
        }
        if (rubric_mean(scores) != oracles::oracle_rubric_mean(tenths)) {
            ok = false;
            detail = "mismatch at trial " + std::to_string(trial);
        }
    }
    double t = elapsed_s(start);
    if (t >= 1.0) {
        ok = false;
        detail = "took " + std::to_string(t) + "s";
    }
    report("rubric-mean exactness (1000 random multisets, < 1s)", ok, detail);
}

void table_average_reproduction() {
    struct Case {
        std::vector<double> values;
        double expect;
    };
    std::vector<Case> cases = {
        {{0.488, 0.610, 0.951, 0.610, 0.612, 0.863, 0.810, 0.845, 1.000}, 0.754},
        {{0.448, 0.447, 0.947, 0.586, 0.604, 0.849, 0.788, 0.816, 1.000}, 0.721},
        {{0.220, 0.204, 0.471, 0.472, 0.457, 0.530, 0.496, 0.841, 0.875}, 0.507},
        {{0.390, 0.350, 0.450, 0.760, 0.410, 0.570, 0.630, 0.830, 0.790, 0.830}, 0.601},
    };
    bool ok = true;
    std::string detail;
    for (const auto& c : cases) {
        double got = row_average(c.values);
        if (std::fabs(got - c.expect) > 0.0005) {
            ok = false;
            detail = "expected " + std::to_string(c.expect) + ", got " + std::to_string(got);
        }
    }
    report("table-average reproduction (0.754 / 0.721 / 0.507 / 0.601 within 0.0005)", ok, detail);
}

void appendix_fixture_replay() {
    auto start = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;
    try {
        auto records = load_dataset(kFixtures / "appendix_dataset.jsonl", true);
        auto preds = load_predictions(kFixtures / "appendix_predictions.jsonl", false);
        auto pairs = pair_predictions(records, preds);
        auto backend = std::make_shared<FixtureChatBackend>(kFixtures / "appendix_case.json");
        ClaimJudge judge(backend, PromptTemplates::builtin(), backend->id());
        MetricResult r =
            wsi_precision(pairs.at(0).record.ground_truth, pairs.at(0).prediction.response, judge);
        if (r.claim_scores.size() != 8) {
            ok = false;
            detail = "claim count " + std::to_string(r.claim_scores.size());
        } else if (r.claim_scores[1].score.tenths() != 7) {
            ok = false;
            detail = "Claim_2 score != 0.7";
        } else if (r.claim_scores[5].score.tenths() != 0) {
            ok = false;
            detail = "Claim_6 score != 0";
        } else if (r.value != 0.8) {
            ok = false;
            detail = "final score " + std::to_string(r.value);
        }
    } catch (const std::exception& e) {
        ok = false;
        detail = e.what();
    }
    if (elapsed_s(start) >= 1.0) {
        ok = false;
        detail = "too slow";
    }
    report("appendix fixture replay (Claim_2 -> 0.7, Claim_6 -> 0, mean 0.800, < 1s)", ok, detail);
}

void text_metric_oracles() {
    auto start = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;
    const std::vector<std::string> vocab = {"tumor", "cell", "gland",  "grade", "focal",
                                            "margin", "cyst", "stroma", "core",  "benign",
                                            "mitotic", "deep"};
    std::mt19937_64 rng(99);
    auto random_seq = [&](std::size_t min_len) {
        std::size_t len = min_len + rng() % (10 - min_len + 1);
        TokenSeq out;
        for (std::size_t i = 0; i < len; ++i) out.push_back(vocab[rng() % vocab.size()]);
        return out;
    };
    int meteor_checked = 0;
    for (int trial = 0; trial < 500 && ok; ++trial) {
        TokenSeq cand = random_seq(0);
        TokenSeq ref = random_seq(1);
        for (int n = 1; n <= 4 && ok; ++n) {
            double got = bleu_n(cand, {ref}, n);
            double want = oracles::oracle_bleu(cand, {ref}, n, false);
            if (std::fabs(got - want) > 1e-9) {
                ok = false;
                detail = "BLEU-" + std::to_string(n) + " mismatch at trial " + std::to_string(trial);
            }
        }
        if (ok && lcs_length(cand, ref) != oracles::oracle_lcs(cand, ref)) {
            ok = false;
            detail = "LCS mismatch";
        }
        if (ok && !cand.empty()) {
            double got = rouge_l(cand, ref).f;
            double want = oracles::oracle_rouge_f(cand, ref, 1.2);
            if (std::fabs(got - want) > 1e-9) {
                ok = false;
                detail = "ROUGE-L mismatch";
            }
        }
        if (ok && !cand.empty()) {
            oracles::MeteorOracle oracle;
            oracle.cand = cand;
            oracle.ref = ref;
            for (const auto& tk : cand) oracle.cand_stem.push_back(light_stem(tk));
            for (const auto& tk : ref) oracle.ref_stem.push_back(light_stem(tk));
            double want = oracle.score(0.9, 3.0, 0.5);
            if (want >= 0) {
                ++meteor_checked;
                double got = meteor(cand, ref);
                if (std::fabs(got - want) > 1e-9) {
                    ok = false;
                    detail = "METEOR mismatch at trial " + std::to_string(trial);
                }
            }
        }
    }
    if (ok && meteor_checked < 400) {
        ok = false;
        detail = "METEOR oracle only covered " + std::to_string(meteor_checked) + " samples";
    }
    // identities
    TokenSeq s = {"sheets", "of", "atypical", "cells"};
    if (ok && std::fabs(bleu_n(s, {s}, 4) - 1.0) > 1e-12) {
        ok = false;
        detail = "BLEU identity != 1";
    }
    if (ok && std::fabs(rouge_l(s, s).f - 1.0) > 1e-12) {
        ok = false;
        detail = "ROUGE identity != 1";
    }
    if (ok && meteor({"tumor"}, {"tumor"}) != 0.5) {
        ok = false;
        detail = "single-token METEOR identity != 0.5";
    }
    double t = elapsed_s(start);
    if (t >= 10.0) {
        ok = false;
        detail = "took " + std::to_string(t) + "s";
    }
    report("text-metric oracles (500 random sequences, identities, < 10s)", ok, detail);
}

void statistics_oracles() {
    bool ok = true;
    std::string detail;
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> unif(0, 1);
    const int kTenths[4] = {0, 3, 7, 10};
    for (int trial = 0; trial < 500 && ok; ++trial) {
        std::size_t n = 2 + rng() % 49;
        std::vector<double> x, y;
        std::vector<int> a, b;
        for (std::size_t i = 0; i < n; ++i) {
            x.push_back(unif(rng));
            y.push_back(unif(rng));
            a.push_back(kTenths[rng() % 4]);
            b.push_back(kTenths[rng() % 4]);
        }
        if (std::fabs(pearson(x, y) - oracles::oracle_pearson(x, y)) > 1e-9) {
            ok = false;
            detail = "pearson mismatch at trial " + std::to_string(trial);
        }
        if (ok && std::fabs(cohen_kappa(a, b) - oracles::oracle_cohen_kappa(a, b)) > 1e-9) {
            ok = false;
            detail = "kappa mismatch at trial " + std::to_string(trial);
        }
    }
    if (ok && std::fabs(pearson({1, 2, 3}, {1, 2, 4}) - 0.98198) > 1e-5) {
        ok = false;
        detail = "hand-computed pearson fixture";
    }
    std::vector<int> ka = {1, 1, 1, 1, 0, 0, 0, 0, 1, 0};
    std::vector<int> kb = {1, 1, 1, 1, 0, 0, 0, 0, 0, 1};
    if (ok && std::fabs(cohen_kappa(ka, kb) - 0.6) > 1e-5) {
        ok = false;
        detail = "hand-computed kappa fixture";
    }
    report("statistics oracles (500 random vectors; r = 0.98198, kappa = 0.6 fixtures)", ok, detail);
}

void determinism_and_cache() {
    auto start = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;
    auto out1 = fresh_dir("det1");
    auto out8 = fresh_dir("det8");
    auto cache = fresh_dir("det_cache");
    std::string base = "eval-open --dataset " + (kFixtures / "open_dataset.jsonl").string() +
                       " --predictions " + (kFixtures / "open_predictions.jsonl").string() +
                       " --mock-judge --cache-dir " + cache.string() + " --out ";
    if (run_cli(base + out1.string() + " --concurrency 1") != 0) {
        ok = false;
        detail = "first run failed";
    }
    if (ok && run_cli(base + out8.string() + " --concurrency 8") != 0) {
        ok = false;
        detail = "second run failed";
    }
    if (ok && slurp(out1 / "results.jsonl") != slurp(out8 / "results.jsonl")) {
        ok = false;
        detail = "results differ across concurrency";
    }
    if (ok) {
        json m8 = json::parse(slurp(out8 / "manifest.json"));
        if (m8.at("counts").at("judge_calls").get<long long>() != 0) {
            ok = false;
            detail = "warm-cache run still called the backend";
        }
    }
    double t = elapsed_s(start);
    if (t >= 5.0) {
        ok = false;
        detail = "took " + std::to_string(t) + "s";
    }
    fs::remove_all(out1);
    fs::remove_all(out8);
    fs::remove_all(cache);
    report("determinism (concurrency 1 vs 8 byte-identical; warm cache -> zero backend calls, < 5s)",
           ok, detail);
}

void sampling_criterion() {
    bool ok = true;
    std::string detail;
    try {
        std::vector<EvalPair> pairs;
        auto add = [&](Capability cap, Task task, int count, const char* prefix) {
            for (int i = 0; i < count; ++i) {
                VqaRecord r;
                r.id = prefix + std::to_string(1000 + i);
                r.wsi_id = "w";
                r.capability = cap;
                r.task = task;
                r.question_type = QuestionType::Open;
                r.question = "q";
                r.ground_truth = "gt";
                pairs.push_back({r, {r.id, "resp", "m"}});
            }
        };
        add(Capability::MorphologicalAnalysis, Task::GlobalMorphologyDescription, 120, "m");
        add(Capability::Diagnosis, Task::Grading, 75, "d");
        add(Capability::TreatmentPlanning, Task::Prognosis, 30, "t");
        add(Capability::ReportGeneration, Task::ReportGeneration, 10, "r");

        auto sample = stratified_sample(pairs, 0.02, 1, 42);
        std::map<Capability, int> per_cap;
        for (const auto& p : sample) per_cap[p.record.capability]++;
        // ceil(0.02 * {120, 75, 30, 10}) = {3, 2, 1, 1}
        if (per_cap[Capability::MorphologicalAnalysis] != 3 ||
            per_cap[Capability::Diagnosis] != 2 ||
            per_cap[Capability::TreatmentPlanning] != 1 ||
            per_cap[Capability::ReportGeneration] != 1) {
            ok = false;
            detail = "per-stratum counts off";
        }
        auto again = stratified_sample(pairs, 0.02, 1, 42);
        for (std::size_t i = 0; ok && i < sample.size(); ++i)
            if (sample[i].record.id != again[i].record.id) {
                ok = false;
                detail = "not reproducible under fixed seed";
            }
    } catch (const std::exception& e) {
        ok = false;
        detail = e.what();
    }
    report("stratified sampling (ceil-per-stratum counts, reproducible seed)", ok, detail);
}

void closed_ended_criterion() {
    bool ok = true;
    std::string detail;
    try {
        auto records = load_dataset(kFixtures / "mcq_dataset.jsonl", true);
        auto preds = load_predictions(kFixtures / "mcq_predictions.jsonl", false);
        auto pairs = pair_predictions(records, preds);
        std::vector<int> scores;
        for (const auto& p : pairs) scores.push_back(score_closed_ended(p).score);
        double acc = accuracy(scores);
        if (pairs.size() != 20 || std::fabs(acc - 0.7) > 1e-12) {
            ok = false;
            detail = "accuracy " + std::to_string(acc) + " over " + std::to_string(pairs.size()) +
                     " items, expected 0.700 over 20";
        }
    } catch (const std::exception& e) {
        ok = false;
        detail = e.what();
    }
    report("closed-ended scoring (20-item MCQ fixture, hand-labeled accuracy 0.700)", ok, detail);
}

}  // namespace

int main() {
    rubric_mean_exactness();
    table_average_reproduction();
    appendix_fixture_replay();
    text_metric_oracles();
    statistics_oracles();
    determinism_and_cache();
    sampling_criterion();
    closed_ended_criterion();
    if (g_failures) {
        std::cout << g_failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all acceptance criteria passed\n";
    return 0;
}
