#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

const std::string kCli = WSIEVAL_CLI_PATH;
const fs::path kFixtures = WSIEVAL_FIXTURES_DIR;

int run(const std::string& args) {
    std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path fresh_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("wsieval_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string open_args(const fs::path& out, const std::string& extra = "") {
    return "eval-open --dataset " + (kFixtures / "open_dataset.jsonl").string() +
           " --predictions " + (kFixtures / "open_predictions.jsonl").string() +
           " --mock-judge --out " + out.string() + " " + extra;
}

}  // namespace

TEST_CASE("eval-closed scores the MCQ fixture and writes a manifest") {
    auto out = fresh_dir("closed");
    int code = run("eval-closed --dataset " + (kFixtures / "mcq_dataset.jsonl").string() +
                   " --predictions " + (kFixtures / "mcq_predictions.jsonl").string() +
                   " --out " + out.string());
    CHECK(code == 0);

    json manifest = json::parse(slurp(out / "manifest.json"));
    CHECK(manifest.at("status") == "ok");
    CHECK(manifest.at("counts").at("pairs") == 20);
    CHECK(manifest.at("command") == "eval-closed");
    CHECK(manifest.at("outputs").size() >= 2);
    for (const auto& o : manifest.at("outputs"))
        CHECK(o.at("sha256").get<std::string>().size() == 64);

    std::string tsv = slurp(out / "closed_scores.tsv");
    CHECK(tsv.find("mcq-001\tC\tC\t1") != std::string::npos);
    CHECK(tsv.find("mcq-020\tA\tB\t0") != std::string::npos);
    fs::remove_all(out);
}

TEST_CASE("eval-open is deterministic across concurrency and reuses a warm cache") {
    auto out1 = fresh_dir("open1");
    auto out8 = fresh_dir("open8");
    auto cache = fresh_dir("open_cache");

    CHECK(run(open_args(out1, "--concurrency 1 --cache-dir " + cache.string())) == 0);
    CHECK(run(open_args(out8, "--concurrency 8 --cache-dir " + cache.string())) == 0);

    CHECK(slurp(out1 / "results.jsonl") == slurp(out8 / "results.jsonl"));
    CHECK_FALSE(slurp(out1 / "results.jsonl").empty());

    json m1 = json::parse(slurp(out1 / "manifest.json"));
    json m8 = json::parse(slurp(out8 / "manifest.json"));
    CHECK(m1.at("counts").at("judge_calls").get<long long>() > 0);
    // warm cache: second run performs zero backend calls
    CHECK(m8.at("counts").at("judge_calls").get<long long>() == 0);
    CHECK(m8.at("counts").at("cache_hits").get<long long>() > 0);
    CHECK(m1.at("counts").at("failures") == 0);

    // results carry the empty-response flag for the blank prediction
    std::string results = slurp(out1 / "results.jsonl");
    CHECK(results.find("empty_response") != std::string::npos);
    fs::remove_all(out1);
    fs::remove_all(out8);
    fs::remove_all(cache);
}

TEST_CASE("eval-open with the replay fixture reproduces the appendix mean") {
    auto out = fresh_dir("appendix");
    int code = run("eval-open --dataset " + (kFixtures / "appendix_dataset.jsonl").string() +
                   " --predictions " + (kFixtures / "appendix_predictions.jsonl").string() +
                   " --fixture " + (kFixtures / "appendix_case.json").string() +
                   " --metrics precision --out " + out.string());
    CHECK(code == 0);
    std::string results = slurp(out / "results.jsonl");
    json line = json::parse(results.substr(0, results.find('\n')));
    CHECK(line.at("pair_id") == "appendix-001");
    CHECK(line.at("value").get<double>() == 0.8);
    CHECK(line.at("claim_scores").size() == 8);
    fs::remove_all(out);
}

TEST_CASE("eval-nlu and eval-report run over report-generation pairs") {
    auto out = fresh_dir("nlu");
    int code = run("eval-nlu --dataset " + (kFixtures / "appendix_dataset.jsonl").string() +
                   " --predictions " + (kFixtures / "appendix_predictions.jsonl").string() +
                   " --out " + out.string());
    CHECK(code == 0);
    json nlu = json::parse(slurp(out / "nlu.json"));
    CHECK(nlu.at("bleu1").get<double>() > 0.0);
    CHECK(nlu.at("rouge_l_f").get<double>() > 0.0);
    CHECK(nlu.at("metadata").at("bleu_smoothing") == "none");

    auto out2 = fresh_dir("report");
    code = run("eval-report --dataset " + (kFixtures / "appendix_dataset.jsonl").string() +
               " --predictions " + (kFixtures / "appendix_predictions.jsonl").string() +
               " --mock-judge --out " + out2.string());
    CHECK(code == 0);
    std::string table = slurp(out2 / "report_table.md");
    CHECK(table.find("example-model") != std::string::npos);
    CHECK(table.find("BLEU-1") != std::string::npos);
    fs::remove_all(out);
    fs::remove_all(out2);
}

TEST_CASE("sample writes a reproducible stratified subset") {
    auto out_a = fresh_dir("sample_a");
    auto out_b = fresh_dir("sample_b");
    std::string base = "sample --dataset " + (kFixtures / "open_dataset.jsonl").string() +
                       " --predictions " + (kFixtures / "open_predictions.jsonl").string() +
                       " --fraction 0.5 --min-per-stratum 1 --seed 9 --out ";
    CHECK(run(base + out_a.string()) == 0);
    CHECK(run(base + out_b.string()) == 0);
    CHECK(slurp(out_a / "sample_dataset.jsonl") == slurp(out_b / "sample_dataset.jsonl"));
    json manifest = json::parse(slurp(out_a / "manifest.json"));
    // strata 4/3/2/1 at fraction 0.5 -> 2+2+1+1
    CHECK(manifest.at("counts").at("sampled") == 6);
    fs::remove_all(out_a);
    fs::remove_all(out_b);
}

TEST_CASE("annotate (scripted) then agreement produce a report") {
    auto out = fresh_dir("agree");
    auto results_dir = fresh_dir("agree_results");
    CHECK(run(open_args(results_dir)) == 0);

    // script: 20 rubric entries (precision+relevance for each of 10 pairs)
    fs::path script = out / "script.txt";
    {
        std::ofstream s(script);
        const char* vals[4] = {"0", "0.3", "0.7", "1"};
        for (int i = 0; i < 20; ++i) s << vals[i % 4] << "\n";
    }
    fs::path ann = out / "annotations.jsonl";
    int code = run("annotate --dataset " + (kFixtures / "open_dataset.jsonl").string() +
                   " --predictions " + (kFixtures / "open_predictions.jsonl").string() +
                   " --rater r1 --annotations " + ann.string() + " --script " + script.string() +
                   " --out " + out.string());
    CHECK(code == 0);

    int code2 = run("agreement --results " + (results_dir / "results.jsonl").string() +
                    " --annotations " + ann.string() + " --out " + out.string());
    CHECK(code2 == 0);
    std::string md = slurp(out / "agreement.md");
    CHECK(md.find("WSI-Precision") != std::string::npos);
    CHECK(md.find("Pearson") != std::string::npos);

    // render from the persisted results
    int code3 = run("render --dataset " + (kFixtures / "open_dataset.jsonl").string() +
                    " --predictions " + (kFixtures / "open_predictions.jsonl").string() +
                    " --results " + (results_dir / "results.jsonl").string() +
                    " --group capability --format csv --out " + out.string());
    CHECK(code3 == 0);
    CHECK(slurp(out / "table.csv").find("model-a") != std::string::npos);
    fs::remove_all(out);
    fs::remove_all(results_dir);
}

TEST_CASE("exit codes distinguish load and judge errors; manifest written on failure") {
    auto out = fresh_dir("errors");
    // missing dataset -> load error (2)
    CHECK(run("eval-open --dataset /nonexistent.jsonl --predictions /nonexistent.jsonl "
              "--mock-judge --out " +
              out.string()) == 2);
    json manifest = json::parse(slurp(out / "manifest.json"));
    CHECK(manifest.at("status") == "failed");

    // no judge specified -> judge error (3)
    CHECK(run("eval-open --dataset " + (kFixtures / "open_dataset.jsonl").string() +
              " --predictions " + (kFixtures / "open_predictions.jsonl").string() + " --out " +
              out.string()) == 3);

    // bad flag -> CLI11 usage error
    CHECK(run("eval-open --no-such-flag") != 0);
    fs::remove_all(out);
}
