#include "wsieval/judge.hpp"

#include <algorithm>
#include <cctype>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "wsieval/digest.hpp"
#include "wsieval/strutil.hpp"
#include "wsieval/textmetrics.hpp"

namespace wsieval {

using json = nlohmann::json;

namespace {

std::string normalize_newlines(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\r' && i + 1 < s.size() && s[i + 1] == '\n') continue;
        out.push_back(s[i] == '\r' ? '\n' : s[i]);
    }
    return out;
}

constexpr const char* kSystemPrompt =
    "You are an expert assistant evaluating generated pathology text.";

constexpr const char* kFormatReminder =
    "\n\nREMINDER: respond with exactly the JSON array format requested above; "
    "scores must be drawn only from {0, 0.3, 0.7, 1}.";

// Pulls the payload between "<header>\n<<<\n" and "\n>>>".
std::optional<std::string> extract_section(const std::string& prompt, const std::string& header) {
    std::string open = header + "\n<<<\n";
    auto b = prompt.find(open);
    if (b == std::string::npos) return std::nullopt;
    b += open.size();
    auto e = prompt.find("\n>>>", b);
    if (e == std::string::npos) return std::nullopt;
    return prompt.substr(b, e - b);
}

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> out;
    std::string current;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if ((c == '.' || c == '!' || c == '?') &&
            (i + 1 >= text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
            std::string s = trim(current);
            if (!s.empty()) out.push_back(s);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    std::string s = trim(current);
    if (!s.empty()) out.push_back(s);
    return out;
}

const std::set<std::string>& stopwords() {
    static const std::set<std::string> kStop = {
        "the", "a",  "an", "is",   "are",  "was",  "were", "of", "in",    "on", "at", "to",
        "and", "or", "with", "for", "by",  "as",   "it",   "this", "that", "there", "be"};
    return kStop;
}

std::vector<std::string> content_tokens(const std::string& text) {
    std::vector<std::string> out;
    for (auto& t : tokenize(text))
        if (!stopwords().count(t)) out.push_back(t);
    return out;
}

// Mock scoring rule: substring -> 1; >= 75% content tokens present -> 0.7;
// >= 40% -> 0.3; else 0.
std::pair<double, std::string> mock_score(const std::string& claim, const std::string& against) {
    std::string norm_claim = normalize_text(claim);
    std::string norm_against = normalize_text(against);
    if (!norm_claim.empty() && norm_against.find(norm_claim) != std::string::npos)
        return {1.0, "claim text appears verbatim in the comparison text"};
    auto tokens = content_tokens(claim);
    if (tokens.empty()) return {0.0, "claim has no content tokens and no verbatim match"};
    auto against_tokens = content_tokens(against);
    std::set<std::string> present(against_tokens.begin(), against_tokens.end());
    std::size_t hit = 0;
    for (const auto& t : tokens)
        if (present.count(t)) ++hit;
    double frac = static_cast<double>(hit) / static_cast<double>(tokens.size());
    std::ostringstream why;
    why << hit << " of " << tokens.size() << " content tokens present in the comparison text";
    if (frac >= 0.75) return {0.7, why.str()};
    if (frac >= 0.40) return {0.3, why.str()};
    return {0.0, why.str()};
}

std::vector<std::string> parse_numbered_lines(const std::string& block) {
    std::vector<std::string> out;
    std::istringstream in(block);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        std::size_t i = 0;
        while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
        if (i == 0 || i >= t.size() || (t[i] != '.' && t[i] != ')')) continue;
        out.push_back(trim(t.substr(i + 1)));
    }
    return out;
}

}  // namespace

std::string canonical_request_bytes(const std::string& judge_id, const ChatRequest& req) {
    json j{{"judge_id", judge_id},
           {"model", req.model},
           {"system", normalize_newlines(req.system_prompt)},
           {"temperature", req.temperature},
           {"user", normalize_newlines(req.user_prompt)}};
    return j.dump();  // object keys serialize sorted
}

std::string request_digest(const std::string& judge_id, const ChatRequest& req) {
    return sha256_hex(canonical_request_bytes(judge_id, req));
}

JudgeConfig load_judge_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw JudgeError("cannot open judge config: " + path.string());
    json j = json::parse(in);
    JudgeConfig c;
    c.endpoint = j.value("endpoint", "");
    c.model = j.value("model", c.model);
    c.temperature = j.value("temperature", 0.0);
    c.max_attempts = j.value("max_attempts", 3);
    c.timeout = std::chrono::milliseconds(j.value("timeout_ms", 30000));
    c.concurrency = j.value("concurrency", 4);
    c.cache_dir = j.value("cache_dir", "");
    c.api_token_env = j.value("api_token_env", c.api_token_env);
    c.prompt_dir = j.value("prompt_dir", "");
    if (c.max_attempts < 1) throw JudgeError("judge config: max_attempts must be >= 1");
    if (c.concurrency < 1) throw JudgeError("judge config: concurrency must be >= 1");
    return c;
}

// ---------------------------------------------------------------------------
// Mock backend

std::string MockChatBackend::complete(const ChatRequest& request) {
    const std::string& prompt = request.user_prompt;
    if (auto source = extract_section(prompt, "SOURCE TEXT:")) {
        json claims = json::array();
        for (const auto& s : split_sentences(*source)) claims.push_back(s);
        return claims.dump(2);
    }
    auto claims_block = extract_section(prompt, "CLAIMS:");
    auto comparison = extract_section(prompt, "COMPARISON TEXT:");
    if (claims_block && comparison) {
        json out = json::array();
        int index = 0;
        for (const auto& claim : parse_numbered_lines(*claims_block)) {
            auto [score, why] = mock_score(claim, *comparison);
            out.push_back({{"index", ++index},
                           {"claim", claim},
                           {"explanation", why},
                           {"score", score}});
        }
        return out.dump(2);
    }
    throw JudgeError("mock judge: unrecognized prompt layout");
}

// ---------------------------------------------------------------------------
// Fixture backend

FixtureChatBackend::FixtureChatBackend(const std::filesystem::path& fixture_file) {
    std::ifstream in(fixture_file);
    if (!in) throw JudgeError("cannot open fixture file: " + fixture_file.string());
    json j = json::parse(in);
    id_ = j.value("judge_id", "fixture-judge");
    for (const auto& e : j.value("extractions", json::array())) {
        std::vector<std::string> claims;
        for (const auto& c : e.at("claims")) claims.push_back(c.get<std::string>());
        extractions_[normalize_text(e.at("source").get<std::string>())] = std::move(claims);
    }
    for (const auto& s : j.value("scores", json::array())) {
        scores_[normalize_text(s.at("claim").get<std::string>())] = {
            s.at("score").get<double>(), s.value("explanation", "recorded fixture score")};
    }
}

std::string FixtureChatBackend::complete(const ChatRequest& request) {
    const std::string& prompt = request.user_prompt;
    if (auto source = extract_section(prompt, "SOURCE TEXT:")) {
        auto it = extractions_.find(normalize_text(*source));
        if (it == extractions_.end())
            throw FixtureMiss("fixture has no extraction recorded for the given source text");
        json claims = json::array();
        for (const auto& c : it->second) claims.push_back(c);
        return claims.dump(2);
    }
    auto claims_block = extract_section(prompt, "CLAIMS:");
    if (claims_block) {
        json out = json::array();
        int index = 0;
        for (const auto& claim : parse_numbered_lines(*claims_block)) {
            auto it = scores_.find(normalize_text(claim));
            if (it == scores_.end()) throw FixtureMiss("fixture has no score recorded for claim: " + claim);
            out.push_back({{"index", ++index},
                           {"claim", claim},
                           {"explanation", it->second.explanation},
                           {"score", it->second.score}});
        }
        return out.dump(2);
    }
    throw JudgeError("fixture judge: unrecognized prompt layout");
}

// ---------------------------------------------------------------------------
// Caching backend

namespace {
thread_local std::unordered_map<const void*, bool> t_last_cached;
}

CachingChatBackend::CachingChatBackend(std::shared_ptr<ChatBackend> inner,
                                       std::filesystem::path cache_dir)
    : inner_(std::move(inner)), dir_(std::move(cache_dir)) {
    std::filesystem::create_directories(dir_);
}

bool CachingChatBackend::last_was_cached() const {
    auto it = t_last_cached.find(this);
    return it != t_last_cached.end() && it->second;
}

std::string CachingChatBackend::complete(const ChatRequest& request) {
    std::string digest = request_digest(inner_->id(), request);
    std::filesystem::path entry = dir_ / (digest + ".json");

    {
        std::lock_guard<std::mutex> lock(mu_);
        std::ifstream in(entry);
        if (in) {
            try {
                json j = json::parse(in);
                std::string response = j.at("response").get<std::string>();
                ++stats_.cache_hits;
                t_last_cached[this] = true;
                return response;
            } catch (const json::exception& e) {
                std::cerr << "warning: corrupt cache entry " << digest << " (" << e.what()
                          << "), treating as miss\n";
            }
        }
    }

    std::string response = inner_->complete(request);
    ++stats_.remote_calls;
    t_last_cached[this] = false;

    json j{{"digest", digest},
           {"request",
            {{"model", request.model},
             {"system", request.system_prompt},
             {"user", request.user_prompt},
             {"temperature", request.temperature}}},
           {"response", response},
           {"timestamp", static_cast<long long>(std::time(nullptr))}};
    std::filesystem::path tmp = dir_ / (digest + ".tmp");
    {
        std::lock_guard<std::mutex> lock(mu_);
        std::ofstream out(tmp);
        out << j.dump(2);
        out.close();
        std::filesystem::rename(tmp, entry);
    }
    return response;
}

// ---------------------------------------------------------------------------
// Prompt templates

PromptTemplates PromptTemplates::builtin() {
    PromptTemplates t;
    t.extraction =
        "You are assisting with the evaluation of generated pathology text.\n"
        "Read the source text below. Identify and refine the relevant information\n"
        "from the context into distinct claims, preserving the logical connections\n"
        "within related ideas. Each claim must be a single assessable statement.\n"
        "\n"
        "Return a JSON array of claim strings, in reading order.\n"
        "\n"
        "SOURCE TEXT:\n"
        "<<<\n"
        "{SOURCE_TEXT}\n"
        ">>>\n";
    t.precision =
        "You are assessing the correctness of a model response against claims\n"
        "extracted from the ground-truth answer.\n"
        "\n"
        "For each claim below, compare it with the comparison text and assign one\n"
        "score: 1 for complete accuracy with perfect alignment to established facts;\n"
        "0.7 for mostly correct information with minor discrepancies that do not\n"
        "alter clinical significance; 0.3 for significant errors in critical content\n"
        "areas affecting the core message; 0 for completely incorrect or unrelated\n"
        "information. Give a short explanation justifying every score.\n"
        "\n"
        "Return a JSON array of objects of the form\n"
        "{\"index\": <claim number>, \"claim\": \"...\", \"explanation\": \"...\", \"score\": <0 | 0.3 | 0.7 | 1>}.\n"
        "\n"
        "CLAIMS:\n"
        "<<<\n"
        "{CLAIMS}\n"
        ">>>\n"
        "COMPARISON TEXT:\n"
        "<<<\n"
        "{COMPARISON_TEXT}\n"
        ">>>\n";
    t.relevance =
        "You are assessing how well each claim extracted from a model response\n"
        "aligns with the ground-truth answer.\n"
        "\n"
        "For each claim below, assign one relevance score based on how well the\n"
        "claim reflects the clinical details and context of the comparison text:\n"
        "1 for complete accuracy with perfect alignment to established facts;\n"
        "0.7 for mostly correct information with minor discrepancies that do not\n"
        "alter clinical significance; 0.3 for significant errors in critical content\n"
        "areas affecting the core message; 0 for completely incorrect or unrelated\n"
        "information. Give a short explanation justifying every score.\n"
        "\n"
        "Return a JSON array of objects of the form\n"
        "{\"index\": <claim number>, \"claim\": \"...\", \"explanation\": \"...\", \"score\": <0 | 0.3 | 0.7 | 1>}.\n"
        "\n"
        "CLAIMS:\n"
        "<<<\n"
        "{CLAIMS}\n"
        ">>>\n"
        "COMPARISON TEXT:\n"
        "<<<\n"
        "{COMPARISON_TEXT}\n"
        ">>>\n";
    return t;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
    auto read = [&](const char* name) {
        std::ifstream in(dir / name);
        if (!in) throw JudgeError("cannot open prompt template: " + (dir / name).string());
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };
    PromptTemplates t;
    t.extraction = read("claims_extraction.txt");
    t.precision = read("wsi_precision.txt");
    t.relevance = read("wsi_relevance.txt");
    return t;
}

namespace {
std::string replace_all_copy(std::string text, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}
}  // namespace

std::string PromptTemplates::render_extraction(const std::string& source_text) const {
    return replace_all_copy(extraction, "{SOURCE_TEXT}", source_text);
}

std::string PromptTemplates::render_scoring(ScoreMode mode, const std::vector<Claim>& claims,
                                            const std::string& comparison_text) const {
    std::ostringstream list;
    for (std::size_t i = 0; i < claims.size(); ++i) {
        if (i) list << '\n';
        list << claims[i].index << ". " << claims[i].text;
    }
    std::string t = mode == ScoreMode::Precision ? precision : relevance;
    t = replace_all_copy(t, "{CLAIMS}", list.str());
    t = replace_all_copy(t, "{COMPARISON_TEXT}", comparison_text);
    return t;
}

// ---------------------------------------------------------------------------
// Response parsing

std::vector<Claim> parse_claims_response(const std::string& raw) {
    std::vector<std::string> texts;
    json j = json::parse(raw, nullptr, false);
    if (j.is_array()) {
        for (const auto& e : j) {
            if (e.is_string())
                texts.push_back(e.get<std::string>());
            else if (e.is_object() && e.contains("claim"))
                texts.push_back(e.at("claim").get<std::string>());
            else if (e.is_object() && e.contains("text"))
                texts.push_back(e.at("text").get<std::string>());
            else
                throw ParseError("claims array holds an element with no claim text");
        }
    } else {
        texts = parse_numbered_lines(raw);
    }
    std::vector<Claim> claims;
    for (const auto& t : texts) {
        std::string trimmed = trim(t);
        if (trimmed.empty()) continue;
        claims.push_back({static_cast<int>(claims.size()) + 1, trimmed});
    }
    if (claims.empty()) throw ParseError("no claims found in judge response");
    return claims;
}

namespace {

RubricScore require_rubric(double v) {
    auto s = RubricScore::from_double(v);
    if (!s) {
        std::ostringstream msg;
        msg << "invalid score value " << v << " (must be one of 0, 0.3, 0.7, 1)";
        throw ParseError(msg.str());
    }
    return *s;
}

double score_from_json(const json& v) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        try {
            return std::stod(v.get<std::string>());
        } catch (...) {
            throw ParseError("non-numeric score value: " + v.get<std::string>());
        }
    }
    throw ParseError("score field is neither number nor string");
}

}  // namespace

std::vector<ClaimScore> parse_scores_response(const std::string& raw,
                                              const std::vector<Claim>& claims) {
    std::map<int, std::pair<RubricScore, std::string>> by_index;

    json j = json::parse(raw, nullptr, false);
    if (j.is_array()) {
        int position = 0;
        for (const auto& e : j) {
            if (!e.is_object()) throw ParseError("score array holds a non-object element");
            ++position;
            int index = e.contains("index") ? e.at("index").get<int>() : position;
            RubricScore score = require_rubric(score_from_json(e.at("score")));
            std::string explanation = trim(e.value("explanation", e.value("reason", "")));
            if (explanation.empty()) explanation = "(no explanation provided)";
            if (!by_index.emplace(index, std::make_pair(score, explanation)).second)
                throw ParseError("duplicate score for claim index " + std::to_string(index));
        }
    } else {
        // Numbered plain-text blocks with "Score: <v>" lines.
        std::istringstream in(raw);
        std::string line;
        int current = 0;
        std::string explanation;
        auto flush_expl = [&]() {
            std::string e = trim(explanation);
            return e.empty() ? std::string("(no explanation provided)") : e;
        };
        while (std::getline(in, line)) {
            std::string t = trim(line);
            std::size_t i = 0;
            while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
            if (i > 0 && i < t.size() && (t[i] == '.' || t[i] == ')')) {
                current = std::stoi(t.substr(0, i));
                explanation.clear();
                continue;
            }
            std::string lower = to_lower(t);
            if (lower.rfind("explanation:", 0) == 0) {
                explanation = trim(t.substr(12));
            } else if (lower.rfind("score:", 0) == 0) {
                if (current == 0) throw ParseError("score line before any claim number");
                double v;
                try {
                    v = std::stod(trim(t.substr(6)));
                } catch (...) {
                    throw ParseError("unparseable score line: " + t);
                }
                if (!by_index.emplace(current, std::make_pair(require_rubric(v), flush_expl()))
                         .second)
                    throw ParseError("duplicate score for claim index " + std::to_string(current));
            }
        }
    }

    std::vector<ClaimScore> out;
    for (const auto& claim : claims) {
        auto it = by_index.find(claim.index);
        if (it == by_index.end())
            throw ParseError("missing score for claim index " + std::to_string(claim.index));
        out.push_back({claim, it->second.first, it->second.second});
    }
    if (by_index.size() != claims.size())
        throw ParseError("judge scored unknown claim indices");
    return out;
}

// ---------------------------------------------------------------------------
// High-level judge

ClaimJudge::ClaimJudge(std::shared_ptr<ChatBackend> backend, PromptTemplates templates,
                       std::string model, double temperature, int max_attempts)
    : backend_(std::move(backend)),
      templates_(std::move(templates)),
      model_(std::move(model)),
      temperature_(temperature),
      max_attempts_(std::max(1, max_attempts)) {}

namespace {

bool backend_served_from_cache(ChatBackend& backend) {
    auto* caching = dynamic_cast<CachingChatBackend*>(&backend);
    return caching != nullptr && caching->last_was_cached();
}

}  // namespace

ExtractionResult ClaimJudge::extract_claims(const std::string& source_text) {
    if (trim(source_text).empty()) throw EmptyText("extract_claims: source text is empty");
    std::string base_prompt = templates_.render_extraction(source_text);

    std::vector<std::string> raws;
    std::string last_error;
    for (int attempt = 1; attempt <= max_attempts_; ++attempt) {
        ChatRequest req{model_, kSystemPrompt,
                        attempt == 1 ? base_prompt : base_prompt + kFormatReminder, temperature_};
        std::string raw = backend_->complete(req);
        raws.push_back(raw);
        try {
            ExtractionResult result;
            result.claims = parse_claims_response(raw);
            result.transcript = {request_digest(backend_->id(), req), req.user_prompt, raw,
                                 attempt, backend_->id(), backend_served_from_cache(*backend_)};
            return result;
        } catch (const ParseError& e) {
            last_error = e.what();
        }
    }
    throw UnparseableAfterRetries("extract_claims failed after " +
                                      std::to_string(max_attempts_) + " attempts: " + last_error,
                                  std::move(raws));
}

ScoringResult ClaimJudge::score_claims(const std::vector<Claim>& claims,
                                       const std::string& against_text, ScoreMode mode) {
    if (claims.empty()) throw EmptyClaims("score_claims: no claims given");
    std::string base_prompt = templates_.render_scoring(mode, claims, against_text);

    std::vector<std::string> raws;
    std::string last_error;
    for (int attempt = 1; attempt <= max_attempts_; ++attempt) {
        ChatRequest req{model_, kSystemPrompt,
                        attempt == 1 ? base_prompt : base_prompt + kFormatReminder, temperature_};
        std::string raw = backend_->complete(req);
        raws.push_back(raw);
        try {
            ScoringResult result;
            result.scores = parse_scores_response(raw, claims);
            result.transcript = {request_digest(backend_->id(), req), req.user_prompt, raw,
                                 attempt, backend_->id(), backend_served_from_cache(*backend_)};
            return result;
        } catch (const ParseError& e) {
            last_error = e.what();
        }
    }
    throw UnparseableAfterRetries("score_claims failed after " + std::to_string(max_attempts_) +
                                      " attempts: " + last_error,
                                  std::move(raws));
}

std::shared_ptr<ClaimJudge> make_remote_judge(const JudgeConfig& config) {
    std::shared_ptr<ChatBackend> backend = std::make_shared<HttpChatBackend>(config);
    if (!config.cache_dir.empty())
        backend = std::make_shared<CachingChatBackend>(backend, config.cache_dir);
    PromptTemplates templates =
        config.prompt_dir.empty() ? PromptTemplates::builtin() : PromptTemplates::load(config.prompt_dir);
    return std::make_shared<ClaimJudge>(backend, std::move(templates), config.model,
                                        config.temperature, config.max_attempts);
}

}  // namespace wsieval
