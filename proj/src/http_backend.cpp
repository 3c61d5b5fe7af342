#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

#include "wsieval/judge.hpp"

namespace wsieval {

using json = nlohmann::json;

namespace {

// Splits a full URL into scheme://host[:port] and path.
std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw JudgeError("endpoint URL missing scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/v1/chat/completions"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpChatBackend::HttpChatBackend(JudgeConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw JudgeError("judge endpoint not configured");
}

std::string HttpChatBackend::complete(const ChatRequest& request) {
    auto [base, path] = split_url(config_.endpoint);
    httplib::Client client(base);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    client.set_connection_timeout(secs.count(), 0);
    client.set_read_timeout(secs.count(), 0);

    httplib::Headers headers;
    if (const char* token = std::getenv(config_.api_token_env.c_str()); token && *token)
        headers.emplace("Authorization", std::string("Bearer ") + token);

    json body{{"model", request.model},
              {"messages",
               {{{"role", "system"}, {"content", request.system_prompt}},
                {{"role", "user"}, {"content", request.user_prompt}}}},
              {"temperature", request.temperature}};
    std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        if (attempt > 1)
            std::this_thread::sleep_for(std::chrono::milliseconds(250) * (1 << (attempt - 2)));
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "server status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw JudgeUnreachable("judge returned status " + std::to_string(res->status) + ": " +
                                   res->body);
        try {
            json j = json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            throw JudgeUnreachable(std::string("malformed chat-completion response: ") + e.what());
        }
    }
    throw JudgeUnreachable("judge unreachable after " + std::to_string(config_.max_attempts) +
                           " attempts: " + last_error);
}

}  // namespace wsieval
