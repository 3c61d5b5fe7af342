#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "wsieval/judge.hpp"
#include "wsieval/strutil.hpp"

using namespace wsieval;

namespace {

const std::filesystem::path kFixtures = WSIEVAL_FIXTURES_DIR;
const std::filesystem::path kPrompts = WSIEVAL_PROMPTS_DIR;

std::filesystem::path fresh_temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("wsieval_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// Backend that fails to parse a fixed number of times before delegating.
class FlakyBackend : public ChatBackend {
public:
    FlakyBackend(std::shared_ptr<ChatBackend> inner, int garbage_attempts)
        : inner_(std::move(inner)), remaining_(garbage_attempts) {}
    std::string complete(const ChatRequest& request) override {
        ++calls_;
        if (remaining_ > 0) {
            --remaining_;
            return "I cannot answer in the requested format.";
        }
        return inner_->complete(request);
    }
    std::string id() const override { return "flaky"; }
    int calls_ = 0;

private:
    std::shared_ptr<ChatBackend> inner_;
    int remaining_;
};

ClaimJudge make_mock_judge(int max_attempts = 3) {
    return ClaimJudge(std::make_shared<MockChatBackend>(), PromptTemplates::builtin(),
                      "mock-judge", 0.0, max_attempts);
}

}  // namespace

TEST_CASE("prompt templates render section markers and the on-disk files match the builtins") {
    PromptTemplates builtin = PromptTemplates::builtin();
    PromptTemplates loaded = PromptTemplates::load(kPrompts);
    CHECK(builtin.extraction == loaded.extraction);
    CHECK(builtin.precision == loaded.precision);
    CHECK(builtin.relevance == loaded.relevance);

    std::string rendered = builtin.render_extraction("Some source.");
    CHECK(rendered.find("SOURCE TEXT:\n<<<\nSome source.\n>>>") != std::string::npos);

    std::vector<Claim> claims = {{1, "First claim."}, {2, "Second claim."}};
    std::string scoring = builtin.render_scoring(ScoreMode::Precision, claims, "Comparison.");
    CHECK(scoring.find("CLAIMS:\n<<<\n1. First claim.\n2. Second claim.\n>>>") !=
          std::string::npos);
    CHECK(scoring.find("COMPARISON TEXT:\n<<<\nComparison.\n>>>") != std::string::npos);
}

TEST_CASE("request digest is stable and normalizes line endings") {
    ChatRequest a{"m", "sys", "line1\nline2", 0.0};
    ChatRequest b{"m", "sys", "line1\r\nline2", 0.0};
    CHECK(request_digest("j", a) == request_digest("j", b));
    CHECK(request_digest("j", a).size() == 64);
    ChatRequest c{"m", "sys", "line1\nline3", 0.0};
    CHECK(request_digest("j", a) != request_digest("j", c));
    CHECK(request_digest("other", a) != request_digest("j", a));
}

TEST_CASE("parse_claims_response accepts JSON arrays and numbered lists") {
    auto claims = parse_claims_response(R"(["First.", "Second."])");
    REQUIRE(claims.size() == 2);
    CHECK(claims[0].index == 1);
    CHECK(claims[1].text == "Second.");

    claims = parse_claims_response(R"([{"claim": "A."}, {"text": "B."}])");
    REQUIRE(claims.size() == 2);
    CHECK(claims[1].text == "B.");

    claims = parse_claims_response("1. First claim\n2) Second claim\nnoise\n");
    REQUIRE(claims.size() == 2);
    CHECK(claims[0].text == "First claim");

    CHECK_THROWS_AS(parse_claims_response("no structure at all"), ParseError);
    CHECK_THROWS_AS(parse_claims_response(R"([{"nope": 1}])"), ParseError);
    CHECK_THROWS_AS(parse_claims_response("[]"), ParseError);
}

TEST_CASE("parse_scores_response is strict about the rubric set and indices") {
    std::vector<Claim> claims = {{1, "A."}, {2, "B."}};
    auto scores = parse_scores_response(
        R"([{"index":1,"score":0.7,"explanation":"x"},{"index":2,"score":0}])", claims);
    REQUIRE(scores.size() == 2);
    CHECK(scores[0].score.tenths() == 7);
    CHECK(scores[1].score.tenths() == 0);
    CHECK(scores[1].explanation == "(no explanation provided)");

    // string-typed scores are accepted when exactly rubric values
    scores = parse_scores_response(R"([{"index":1,"score":"0.3"},{"index":2,"score":"1"}])",
                                   claims);
    CHECK(scores[0].score.tenths() == 3);

    // plain-text block format
    scores = parse_scores_response(
        "1. A.\nExplanation: fine\nScore: 1\n2. B.\nExplanation: off\nScore: 0.3\n", claims);
    CHECK(scores[0].score.tenths() == 10);
    CHECK(scores[1].explanation == "off");

    // out-of-rubric scores are rejected, never rounded
    CHECK_THROWS_AS(parse_scores_response(
                        R"([{"index":1,"score":0.5},{"index":2,"score":1}])", claims),
                    ParseError);
    // missing claim index
    CHECK_THROWS_AS(parse_scores_response(R"([{"index":1,"score":1}])", claims), ParseError);
    // unknown extra index
    CHECK_THROWS_AS(parse_scores_response(
                        R"([{"index":1,"score":1},{"index":2,"score":1},{"index":9,"score":1}])",
                        claims),
                    ParseError);
    // duplicate index
    CHECK_THROWS_AS(parse_scores_response(
                        R"([{"index":1,"score":1},{"index":1,"score":0}])", claims),
                    ParseError);
}

TEST_CASE("mock judge: extraction splits sentences, scoring follows the overlap rules") {
    ClaimJudge judge = make_mock_judge();
    auto extraction = judge.extract_claims("First sentence. Second one! Third?");
    REQUIRE(extraction.claims.size() == 3);
    CHECK(extraction.claims[0].text == "First sentence");
    CHECK(extraction.claims[2].index == 3);
    CHECK(extraction.transcript.judge_id == "mock-judge");
    CHECK_FALSE(extraction.transcript.cached);

    // verbatim -> 1; full content overlap in different order -> 0.7
    auto scoring = judge.score_claims(
        {{1, "The tumor is high grade"}, {2, "grade high shows tumor the"}, {3, "Benign cyst"}},
        "Review: the tumor is high grade overall.", ScoreMode::Precision);
    REQUIRE(scoring.scores.size() == 3);
    CHECK(scoring.scores[0].score.value() == doctest::Approx(1.0));
    CHECK(scoring.scores[1].score.value() == doctest::Approx(0.7));
    CHECK(scoring.scores[2].score.value() == doctest::Approx(0.0));

    // partial overlap in [40%, 75%) -> 0.3: 1 of 2 content tokens
    scoring = judge.score_claims({{1, "necrosis cyst"}}, "focal necrosis seen",
                                 ScoreMode::Relevance);
    CHECK(scoring.scores[0].score.value() == doctest::Approx(0.3));

    // scoring against empty text gives all zeros (empty-response policy)
    scoring = judge.score_claims({{1, "The tumor is high grade"}}, "", ScoreMode::Precision);
    CHECK(scoring.scores[0].score.value() == doctest::Approx(0.0));

    CHECK_THROWS_AS(judge.extract_claims("   "), EmptyText);
    CHECK_THROWS_AS(judge.score_claims({}, "text", ScoreMode::Precision), EmptyClaims);
}

TEST_CASE("fixture backend replays the recorded appendix case") {
    auto backend = std::make_shared<FixtureChatBackend>(kFixtures / "appendix_case.json");
    ClaimJudge judge(backend, PromptTemplates::builtin(), backend->id());
    std::ifstream ds(kFixtures / "appendix_dataset.jsonl");
    std::string line;
    std::getline(ds, line);
    auto gt_pos = line.find("\"ground_truth\": \"");
    REQUIRE(gt_pos != std::string::npos);

    auto extraction = judge.extract_claims(
        "Microscopic observation of the pathology slide reveals sheets and nests of atypical "
        "squamous cells with moderate differentiation. There is evidence of focal keratinization, "
        "characterized by the presence of keratin pearls within the tumor tissue. Intercellular "
        "bridges are noted among the squamous cells, indicating differentiation towards squamous "
        "epithelium. The cellular morphology shows moderate pleomorphism, with variability in "
        "nuclear size and shape, and occasional prominent nucleoli. Mitotic figures are present "
        "but not excessively numerous. Vascular invasion is not specified in the observations, "
        "and necrosis is not prominently noted. Based on these observations, the diagnosis is "
        "squamous cell carcinoma, moderately differentiated.");
    REQUIRE(extraction.claims.size() == 8);
    CHECK(extraction.claims[5].text == "Vascular invasion is not specified.");

    auto scoring = judge.score_claims(extraction.claims, "anything", ScoreMode::Precision);
    REQUIRE(scoring.scores.size() == 8);
    CHECK(scoring.scores[1].score.value() == doctest::Approx(0.7));
    CHECK(scoring.scores[5].score.value() == doctest::Approx(0.0));

    // unknown source text is a FixtureMiss wrapped in retries
    CHECK_THROWS_AS(judge.extract_claims("Totally unknown text."), FixtureMiss);
}

TEST_CASE("retry appends the format reminder and reports attempts") {
    auto flaky = std::make_shared<FlakyBackend>(std::make_shared<MockChatBackend>(), 2);
    ClaimJudge judge(flaky, PromptTemplates::builtin(), "flaky", 0.0, 3);
    auto extraction = judge.extract_claims("One sentence only.");
    CHECK(extraction.transcript.attempts == 3);
    CHECK(flaky->calls_ == 3);
    CHECK(extraction.transcript.prompt.find("REMINDER") != std::string::npos);

    auto flaky2 = std::make_shared<FlakyBackend>(std::make_shared<MockChatBackend>(), 5);
    ClaimJudge judge2(flaky2, PromptTemplates::builtin(), "flaky", 0.0, 2);
    try {
        judge2.extract_claims("One sentence only.");
        FAIL("expected UnparseableAfterRetries");
    } catch (const UnparseableAfterRetries& e) {
        CHECK(e.raw_responses.size() == 2);
    }
}

TEST_CASE("caching backend: hit on second call, zero inner calls, corrupt entry degrades") {
    auto dir = fresh_temp_dir("cache_test");
    auto counting = std::make_shared<FlakyBackend>(std::make_shared<MockChatBackend>(), 0);
    auto cache = std::make_shared<CachingChatBackend>(counting, dir);

    ChatRequest req{"m", "sys", PromptTemplates::builtin().render_extraction("A sentence."), 0.0};
    std::string first = cache->complete(req);
    CHECK(cache->stats().remote_calls.load() == 1);
    CHECK(cache->stats().cache_hits.load() == 0);
    CHECK_FALSE(cache->last_was_cached());

    std::string second = cache->complete(req);
    CHECK(second == first);
    CHECK(cache->stats().remote_calls.load() == 1);
    CHECK(cache->stats().cache_hits.load() == 1);
    CHECK(cache->last_was_cached());
    CHECK(counting->calls_ == 1);

    // corrupt the entry: next call degrades to a miss and rewrites it
    std::string digest = request_digest(counting->id(), req);
    {
        std::ofstream out(dir / (digest + ".json"));
        out << "{not json";
    }
    std::string third = cache->complete(req);
    CHECK(third == first);
    CHECK(cache->stats().remote_calls.load() == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("judge config loads from JSON and validates bounds") {
    auto dir = fresh_temp_dir("judge_config");
    auto path = dir / "config.json";
    {
        std::ofstream out(path);
        out << R"({"endpoint": "https://judge.example/v1/chat/completions", "model": "judge-1",
                   "temperature": 0.0, "max_attempts": 2, "timeout_ms": 5000,
                   "concurrency": 8, "api_token_env": "MY_TOKEN_VAR"})";
    }
    JudgeConfig c = load_judge_config(path);
    CHECK(c.model == "judge-1");
    CHECK(c.max_attempts == 2);
    CHECK(c.concurrency == 8);
    CHECK(c.api_token_env == "MY_TOKEN_VAR");
    CHECK(c.cache_dir.empty());
    {
        std::ofstream out(path);
        out << R"({"endpoint": "x", "max_attempts": 0})";
    }
    CHECK_THROWS_AS(load_judge_config(path), JudgeError);
    std::filesystem::remove_all(dir);
}
