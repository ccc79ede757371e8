#include "printdbg/gateway.hpp"

#include "printdbg/digest.hpp"

#include "httplib.h"

#include <cstdlib>
#include <fstream>
#include <thread>

namespace printdbg::gateway {

using nlohmann::json;

std::string to_string(Role role) {
    switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    }
    return "user";
}

Role role_from_string(const std::string& s) {
    if (s == "system") return Role::system;
    if (s == "user") return Role::user;
    if (s == "assistant") return Role::assistant;
    throw GatewayError("unknown role: " + s);
}

Conversation Conversation::from_user(std::string content) {
    Conversation conv;
    conv.messages.push_back({Role::user, std::move(content)});
    return conv;
}

Conversation& Conversation::add(Role role, std::string content) {
    messages.push_back({role, std::move(content)});
    return *this;
}

std::string to_string(FinishReason r) {
    switch (r) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::other: return "other";
    }
    return "other";
}

FinishReason finish_reason_from_string(const std::string& s) {
    if (s == "stop") return FinishReason::stop;
    if (s == "length") return FinishReason::length;
    return FinishReason::other;
}

json completion_to_json(const Completion& c) {
    json j{{"text", c.text}, {"finish_reason", to_string(c.finish_reason)}};
    if (c.usage) {
        j["usage"] = json{{"prompt_tokens", c.usage->prompt_tokens},
                          {"completion_tokens", c.usage->completion_tokens},
                          {"total_tokens", c.usage->total_tokens}};
    }
    return j;
}

Completion completion_from_json(const json& j) {
    Completion c;
    c.text = j.at("text").get<std::string>();
    c.finish_reason = finish_reason_from_string(j.value("finish_reason", "stop"));
    if (j.contains("usage")) {
        TokenUsage usage;
        usage.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
        usage.completion_tokens = j["usage"].value("completion_tokens", 0L);
        usage.total_tokens = j["usage"].value("total_tokens", 0L);
        c.usage = usage;
    }
    return c;
}

std::string request_digest(const Conversation& conv, const GenerationParams& params) {
    // nlohmann objects are key-sorted, so dump() is already canonical; values
    // parsed back from any serialization produce the same digest.
    json j;
    j["model_name"] = params.model_name;
    j["temperature"] = params.temperature;
    j["max_tokens"] = params.max_tokens;
    j["messages"] = json::array();
    for (const auto& m : conv.messages) {
        j["messages"].push_back(json{{"role", to_string(m.role)}, {"content", m.content}});
    }
    return sha256_hex(j.dump());
}

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

ReplayFixture ReplayFixture::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw GatewayError("cannot open fixture file: " + file.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw GatewayError("fixture " + file.string() + ": " + e.what());
    }
    ReplayFixture fixture;
    fixture.model_name = j.value("model_name", std::string{});
    fixture.recorded_at = j.value("recorded_at", std::string{});
    for (const auto& je : j.at("entries")) {
        fixture.entries.push_back(
            {je.at("request_digest").get<std::string>(), completion_from_json(je.at("completion"))});
    }
    return fixture;
}

void ReplayFixture::save(const std::filesystem::path& file) const {
    json j;
    j["model_name"] = model_name;
    j["recorded_at"] = recorded_at;
    j["entries"] = json::array();
    for (const auto& entry : entries) {
        j["entries"].push_back(json{{"request_digest", entry.request_digest},
                                    {"completion", completion_to_json(entry.completion)}});
    }
    if (file.has_parent_path()) {
        std::filesystem::create_directories(file.parent_path());
    }
    std::ofstream out(file);
    if (!out) {
        throw GatewayError("cannot write fixture file: " + file.string());
    }
    out << j.dump(2) << '\n';
}

ReplayFixture record_fixture(const std::vector<CallRecord>& session) {
    ReplayFixture fixture;
    for (const auto& call : session) {
        if (fixture.model_name.empty()) {
            fixture.model_name = call.params.model_name;
        }
        fixture.entries.push_back(
            {request_digest(call.conversation, call.params), call.completion});
    }
    return fixture;
}

// ---------------------------------------------------------------------------
// HTTP backend
// ---------------------------------------------------------------------------

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {}

namespace {

struct TransportError {
    std::string message;
    bool retryable;
};

Completion parse_provider_response(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw GatewayError(std::string("unparsable provider response: ") + e.what());
    }
    if (j.contains("error")) {
        throw GatewayError("provider error: " + j["error"].dump());
    }
    const auto& choices = j.at("choices");
    if (choices.empty()) {
        throw GatewayError("provider response has no choices");
    }
    const auto& first = choices.at(0);
    Completion c;
    c.text = first.at("message").at("content").get<std::string>();
    c.finish_reason = finish_reason_from_string(first.value("finish_reason", "stop"));
    if (c.text.empty() && c.finish_reason == FinishReason::stop) {
        throw GatewayError("provider returned an empty completion with finish_reason=stop");
    }
    if (j.contains("usage")) {
        TokenUsage usage;
        usage.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
        usage.completion_tokens = j["usage"].value("completion_tokens", 0L);
        usage.total_tokens = j["usage"].value("total_tokens", 0L);
        c.usage = usage;
    }
    return c;
}

} // namespace

Completion with_retries(int attempts, std::chrono::milliseconds initial_backoff,
                        const std::function<Completion()>& fn,
                        const std::function<bool(const GatewayError&)>& retryable) {
    std::chrono::milliseconds backoff = initial_backoff;
    for (int attempt = 1;; ++attempt) {
        try {
            return fn();
        } catch (const GatewayError& e) {
            if (attempt >= attempts || !retryable(e)) {
                throw;
            }
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
}

Completion HttpBackend::complete(const Conversation& conv, const GenerationParams& params) {
    json body;
    body["model"] = params.model_name;
    body["temperature"] = params.temperature;
    body["max_tokens"] = params.max_tokens;
    body["messages"] = json::array();
    for (const auto& m : conv.messages) {
        body["messages"].push_back(json{{"role", to_string(m.role)}, {"content", m.content}});
    }
    const std::string payload = body.dump();

    std::string api_key;
    if (const char* key = std::getenv(config_.api_key_env.c_str())) {
        api_key = key;
    }

    auto one_call = [&]() -> Completion {
        httplib::Client client(config_.base_url);
        client.set_connection_timeout(30);
        client.set_read_timeout(600);
        httplib::Headers headers;
        if (!api_key.empty()) {
            if (config_.auth_header == "Authorization") {
                headers.emplace("Authorization", "Bearer " + api_key);
            } else {
                headers.emplace(config_.auth_header, api_key);
            }
        }
        auto res = client.Post(config_.path, headers, payload, "application/json");
        if (!res) {
            throw GatewayError("transport error: " + httplib::to_string(res.error()) +
                               " [retryable]");
        }
        if (res->status == 429 || res->status >= 500) {
            throw GatewayError("provider status " + std::to_string(res->status) + ": " +
                               res->body + " [retryable]");
        }
        if (res->status != 200) {
            throw GatewayError("provider status " + std::to_string(res->status) + ": " +
                               res->body);
        }
        return parse_provider_response(res->body);
    };
    auto retryable = [](const GatewayError& e) {
        return std::string_view(e.what()).find("[retryable]") != std::string_view::npos;
    };
    return with_retries(config_.retry_attempts, config_.retry_initial_backoff, one_call,
                        retryable);
}

// ---------------------------------------------------------------------------
// Replay / scripted / recording backends
// ---------------------------------------------------------------------------

ReplayBackend::ReplayBackend(ReplayFixture fixture) : fixture_(std::move(fixture)) {
    for (std::size_t i = 0; i < fixture_.entries.size(); ++i) {
        queues_[fixture_.entries[i].request_digest].push_back(i);
    }
}

Completion ReplayBackend::complete(const Conversation& conv, const GenerationParams& params) {
    const std::string digest = request_digest(conv, params);
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = queues_.find(digest);
    if (it == queues_.end() || it->second.empty()) {
        throw GatewayError("replay miss: no unconsumed fixture entry for request digest " +
                           digest);
    }
    const std::size_t index = it->second.front();
    it->second.pop_front();
    return fixture_.entries[index].completion;
}

std::size_t ReplayBackend::remaining() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::size_t n = 0;
    for (const auto& [digest, queue] : queues_) {
        n += queue.size();
    }
    return n;
}

ScriptedBackend::ScriptedBackend(std::vector<Completion> responses)
    : responses_(std::move(responses)) {}

Completion ScriptedBackend::complete(const Conversation&, const GenerationParams&) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (next_ >= responses_.size()) {
        throw GatewayError("scripted backend exhausted after " + std::to_string(next_) +
                           " calls");
    }
    return responses_[next_++];
}

RecordingBackend::RecordingBackend(std::shared_ptr<ModelBackend> inner,
                                   std::optional<std::filesystem::path> sink)
    : inner_(std::move(inner)), sink_(std::move(sink)) {}

Completion RecordingBackend::complete(const Conversation& conv, const GenerationParams& params) {
    Completion completion = inner_->complete(conv, params);
    std::lock_guard<std::mutex> lock(mutex_);
    session_.push_back({conv, params, completion});
    if (sink_) {
        record_fixture(session_).save(*sink_);
    }
    return completion;
}

ReplayFixture RecordingBackend::fixture() const {
    return record_fixture(session_);
}

// ---------------------------------------------------------------------------
// Cache and gateway front
// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::optional<Completion> ResponseCache::lookup(const std::string& digest) const {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto file = dir_ / (digest + ".json");
    std::ifstream in(file);
    if (!in) {
        return std::nullopt;
    }
    try {
        json j;
        in >> j;
        return completion_from_json(j);
    } catch (const json::exception&) {
        return std::nullopt; // unreadable entry behaves like a miss
    }
}

void ResponseCache::store(const std::string& digest, const Completion& completion) {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto file = dir_ / (digest + ".json");
    const auto tmp = dir_ / (digest + ".tmp");
    {
        std::ofstream out(tmp);
        if (!out) {
            return; // cache is best-effort
        }
        out << completion_to_json(completion).dump(2) << '\n';
    }
    std::error_code ec;
    std::filesystem::rename(tmp, file, ec);
}

Gateway::Gateway(std::shared_ptr<ModelBackend> backend, std::shared_ptr<ResponseCache> cache)
    : backend_(std::move(backend)), cache_(std::move(cache)) {}

Completion Gateway::complete(const Conversation& conv, const GenerationParams& params) {
    if (conv.messages.empty()) {
        throw GatewayError("conversation must be non-empty");
    }
    if (conv.messages.front().role == Role::assistant) {
        throw GatewayError("conversation must start with a system or user message");
    }
    std::string digest;
    if (cache_) {
        digest = request_digest(conv, params);
        if (auto hit = cache_->lookup(digest)) {
            return *hit;
        }
    }
    Completion completion = backend_->complete(conv, params);
    if (cache_) {
        cache_->store(digest, completion);
    }
    return completion;
}

} // namespace printdbg::gateway
