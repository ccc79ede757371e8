#pragma once

#include "printdbg/errors.hpp"
#include "printdbg/values.hpp"

#include <chrono>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace printdbg::gateway {

enum class Role { system, user, assistant };

std::string to_string(Role role);
Role role_from_string(const std::string& s);

struct ChatMessage {
    Role role{Role::user};
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct Conversation {
    std::vector<ChatMessage> messages;

    static Conversation from_user(std::string content);
    Conversation& add(Role role, std::string content);

    bool operator==(const Conversation&) const = default;
};

struct GenerationParams {
    std::string model_name{"gpt-4"};
    double temperature{0.0};
    int max_tokens{4096};

    bool operator==(const GenerationParams&) const = default;
};

enum class FinishReason { stop, length, other };

std::string to_string(FinishReason r);
FinishReason finish_reason_from_string(const std::string& s);

struct TokenUsage {
    long prompt_tokens{0};
    long completion_tokens{0};
    long total_tokens{0};

    bool operator==(const TokenUsage&) const = default;
};

struct Completion {
    std::string text;
    FinishReason finish_reason{FinishReason::stop};
    std::optional<TokenUsage> usage;

    bool operator==(const Completion&) const = default;
};

nlohmann::json completion_to_json(const Completion& c);
Completion completion_from_json(const nlohmann::json& j);

/// Digest of the canonicalized (conversation, params) pair. Key order and
/// serialization whitespace never affect it.
std::string request_digest(const Conversation& conv, const GenerationParams& params);

struct FixtureEntry {
    std::string request_digest;
    Completion completion;
};

/// Recorded completions keyed by request digest, consumed in match order.
struct ReplayFixture {
    std::vector<FixtureEntry> entries;
    std::string model_name;
    std::string recorded_at;

    static ReplayFixture load(const std::filesystem::path& file);
    void save(const std::filesystem::path& file) const;
};

struct CallRecord {
    Conversation conversation;
    GenerationParams params;
    Completion completion;
};

/// Builds a fixture whose replay against the identical request sequence
/// reproduces the identical completions.
ReplayFixture record_fixture(const std::vector<CallRecord>& session);

class ModelBackend {
public:
    virtual ~ModelBackend() = default;
    virtual Completion complete(const Conversation& conv, const GenerationParams& params) = 0;
    virtual std::string name() const = 0;
};

struct HttpBackendConfig {
    std::string base_url{"https://api.openai.com"};
    std::string path{"/v1/chat/completions"};
    std::string api_key_env{"MODEL_API_KEY"};
    std::string auth_header{"Authorization"}; // "Authorization" sends "Bearer <key>"
    int retry_attempts{3};
    std::chrono::milliseconds retry_initial_backoff{2000};
};

/// Provider-agnostic chat-completion client. Retries transport errors, 429
/// and 5xx with exponential backoff; other provider errors are surfaced
/// verbatim as GatewayError.
class HttpBackend : public ModelBackend {
public:
    explicit HttpBackend(HttpBackendConfig config);

    Completion complete(const Conversation& conv, const GenerationParams& params) override;
    std::string name() const override { return "http"; }

private:
    HttpBackendConfig config_;
};

/// Fixture-driven backend: fully deterministic, zero network. A request whose
/// digest has no unconsumed fixture entry is a fatal replay miss.
class ReplayBackend : public ModelBackend {
public:
    explicit ReplayBackend(ReplayFixture fixture);

    Completion complete(const Conversation& conv, const GenerationParams& params) override;
    std::string name() const override { return "replay"; }

    std::size_t remaining() const;

private:
    ReplayFixture fixture_;
    std::map<std::string, std::deque<std::size_t>> queues_;
    mutable std::mutex mutex_;
};

/// Answers by position from a canned list, ignoring request content. Used by
/// fixture authoring and tests.
class ScriptedBackend : public ModelBackend {
public:
    explicit ScriptedBackend(std::vector<Completion> responses);

    Completion complete(const Conversation& conv, const GenerationParams& params) override;
    std::string name() const override { return "scripted"; }

    std::size_t calls() const { return next_; }

private:
    std::vector<Completion> responses_;
    std::size_t next_{0};
    std::mutex mutex_;
};

/// Wraps another backend, capturing every call. When a sink path is set the
/// fixture file is rewritten after each completion so long sessions survive
/// a crash.
class RecordingBackend : public ModelBackend {
public:
    RecordingBackend(std::shared_ptr<ModelBackend> inner,
                     std::optional<std::filesystem::path> sink = std::nullopt);

    Completion complete(const Conversation& conv, const GenerationParams& params) override;
    std::string name() const override { return "record"; }

    const std::vector<CallRecord>& session() const { return session_; }
    ReplayFixture fixture() const;

private:
    std::shared_ptr<ModelBackend> inner_;
    std::optional<std::filesystem::path> sink_;
    std::vector<CallRecord> session_;
    std::mutex mutex_;
};

/// On-disk content-addressed completion store: <dir>/<digest>.json.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<Completion> lookup(const std::string& digest) const;
    void store(const std::string& digest, const Completion& completion);

private:
    std::filesystem::path dir_;
    mutable std::mutex mutex_;
};

/// Uniform entry point: consults the cache (when present) before the backend
/// and never changes what a deterministic request returns, only call counts.
class Gateway {
public:
    explicit Gateway(std::shared_ptr<ModelBackend> backend,
                     std::shared_ptr<ResponseCache> cache = nullptr);

    Completion complete(const Conversation& conv, const GenerationParams& params);

    ModelBackend& backend() { return *backend_; }

private:
    std::shared_ptr<ModelBackend> backend_;
    std::shared_ptr<ResponseCache> cache_;
};

/// Runs fn with bounded retries and exponential backoff. fn reports whether
/// its failure class is retryable; the last error is rethrown on exhaustion.
Completion with_retries(int attempts, std::chrono::milliseconds initial_backoff,
                        const std::function<Completion()>& fn,
                        const std::function<bool(const GatewayError&)>& retryable);

} // namespace printdbg::gateway
