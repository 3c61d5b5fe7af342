#pragma once
// Judge abstraction: prompt construction for claims extraction and claim
// scoring, chat-completion backends (remote, mock, fixture replay), strict
// response parsing, retries and a content-addressed response cache.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wsieval/types.hpp"

namespace wsieval {

struct Claim {
    int index = 0;  // 1-based, contiguous
    std::string text;

    bool operator==(const Claim&) const = default;
};

struct ClaimScore {
    Claim claim;
    RubricScore score = *RubricScore::from_tenths(0);
    std::string explanation;
};

enum class ScoreMode { Precision, Relevance };

struct JudgeTranscript {
    std::string request_digest;
    std::string prompt;
    std::string raw_response;
    int attempts = 1;
    std::string judge_id;
    bool cached = false;
};

struct JudgeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyText : JudgeError {
    using JudgeError::JudgeError;
};
struct EmptyClaims : JudgeError {
    using JudgeError::JudgeError;
};
struct JudgeUnreachable : JudgeError {
    using JudgeError::JudgeError;
};
struct UnparseableAfterRetries : JudgeError {
    std::vector<std::string> raw_responses;
    UnparseableAfterRetries(const std::string& what, std::vector<std::string> raws)
        : JudgeError(what), raw_responses(std::move(raws)) {}
};
struct FixtureMiss : JudgeError {
    using JudgeError::JudgeError;
};
struct ParseError : JudgeError {
    using JudgeError::JudgeError;
};

struct ChatRequest {
    std::string model;
    std::string system_prompt;
    std::string user_prompt;
    double temperature = 0.0;
};

// Canonical byte serialization of a request (sorted keys, \n line endings);
// its SHA-256 is the cache key and the transcript digest.
std::string canonical_request_bytes(const std::string& judge_id, const ChatRequest& req);
std::string request_digest(const std::string& judge_id, const ChatRequest& req);

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string complete(const ChatRequest& request) = 0;
    virtual std::string id() const = 0;
};

struct JudgeConfig {
    std::string endpoint;  // full chat-completion URL
    std::string model = "gpt-4o";
    double temperature = 0.0;
    int max_attempts = 3;
    std::chrono::milliseconds timeout{30000};
    int concurrency = 4;
    std::filesystem::path cache_dir;   // empty disables caching
    std::string api_token_env = "WSIEVAL_API_TOKEN";
    std::filesystem::path prompt_dir;  // empty uses built-in templates
};

JudgeConfig load_judge_config(const std::filesystem::path& path);

// Remote OpenAI-compatible endpoint with exponential backoff on transport
// errors. Bearer token read from the environment variable named in config.
class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(JudgeConfig config);
    std::string complete(const ChatRequest& request) override;
    std::string id() const override { return config_.model; }

private:
    JudgeConfig config_;
};

// Deterministic offline judge. Recognizes the section markers emitted by the
// prompt templates; extraction splits the source into sentences, scoring uses
// substring / content-token-overlap rules over normalized text.
class MockChatBackend : public ChatBackend {
public:
    std::string complete(const ChatRequest& request) override;
    std::string id() const override { return "mock-judge"; }
};

// Replays recorded (source -> claims) and (claim -> score) tables exactly.
class FixtureChatBackend : public ChatBackend {
public:
    explicit FixtureChatBackend(const std::filesystem::path& fixture_file);
    std::string complete(const ChatRequest& request) override;
    std::string id() const override { return id_; }

private:
    std::string id_;
    std::map<std::string, std::vector<std::string>> extractions_;  // by normalized source
    struct Recorded {
        double score;
        std::string explanation;
    };
    std::map<std::string, Recorded> scores_;  // by normalized claim
};

struct CacheStats {
    std::atomic<long long> remote_calls{0};
    std::atomic<long long> cache_hits{0};
};

// Content-addressed response cache: one file per digest, atomic rename on
// write, corrupt entries degrade to a miss with a warning.
class CachingChatBackend : public ChatBackend {
public:
    CachingChatBackend(std::shared_ptr<ChatBackend> inner, std::filesystem::path cache_dir);
    std::string complete(const ChatRequest& request) override;
    std::string id() const override { return inner_->id(); }

    const CacheStats& stats() const { return stats_; }
    // Whether the last complete() on this thread was served from cache.
    bool last_was_cached() const;

private:
    std::shared_ptr<ChatBackend> inner_;
    std::filesystem::path dir_;
    CacheStats stats_;
    mutable std::mutex mu_;
};

struct PromptTemplates {
    std::string extraction;  // placeholder {SOURCE_TEXT}
    std::string precision;   // placeholders {CLAIMS}, {COMPARISON_TEXT}
    std::string relevance;   // placeholders {CLAIMS}, {COMPARISON_TEXT}

    static PromptTemplates builtin();
    // Reads claims_extraction.txt, wsi_precision.txt, wsi_relevance.txt.
    static PromptTemplates load(const std::filesystem::path& dir);

    std::string render_extraction(const std::string& source_text) const;
    std::string render_scoring(ScoreMode mode, const std::vector<Claim>& claims,
                               const std::string& comparison_text) const;
};

// Response parsers. Accept a JSON array (of strings / of objects) or a
// numbered plain-text list; scores outside {0, 0.3, 0.7, 1} are rejected,
// never rounded.
std::vector<Claim> parse_claims_response(const std::string& raw);
std::vector<ClaimScore> parse_scores_response(const std::string& raw,
                                              const std::vector<Claim>& claims);

struct ExtractionResult {
    std::vector<Claim> claims;
    JudgeTranscript transcript;
};

struct ScoringResult {
    std::vector<ClaimScore> scores;
    JudgeTranscript transcript;
};

// High-level judge: renders prompts, calls the backend, parses strictly and
// retries with a format reminder on parse failures.
class ClaimJudge {
public:
    ClaimJudge(std::shared_ptr<ChatBackend> backend, PromptTemplates templates,
               std::string model = "gpt-4o", double temperature = 0.0, int max_attempts = 3);

    ExtractionResult extract_claims(const std::string& source_text);
    // against_text may be empty (empty-model-response policy); claims may not.
    ScoringResult score_claims(const std::vector<Claim>& claims, const std::string& against_text,
                               ScoreMode mode);

    ChatBackend& backend() { return *backend_; }

private:
    std::shared_ptr<ChatBackend> backend_;
    PromptTemplates templates_;
    std::string model_;
    double temperature_;
    int max_attempts_;
};

// Builds the full judge stack described by a config: http backend, wrapped in
// a cache when cache_dir is set, templates from prompt_dir or built-ins.
std::shared_ptr<ClaimJudge> make_remote_judge(const JudgeConfig& config);

}  // namespace wsieval
