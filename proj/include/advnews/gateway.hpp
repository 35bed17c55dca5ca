#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "advnews/prompts.hpp"
#include "advnews/util.hpp"

namespace advnews {

struct ModelProfile {
    std::string model_name;
    std::string endpoint_url;
    std::optional<Date> knowledge_cutoff;
    std::string auth_env_var;

    json to_json() const;
    static ModelProfile from_json(const json& j);
};

struct ChatRequest {
    TemplateId template_id = TemplateId::detector;
    Bindings bindings;
    double temperature = 1.0;
    int n_samples = 1;
    int max_output = 1024;
    std::string model_name;  // empty -> gateway default
};

struct TokenUsage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

struct ChatResponse {
    std::vector<std::string> texts;
    TokenUsage usage;
    std::string backend;  // "live" | "scripted"
    bool cache_hit = false;
};

/// A fully rendered request as handed to a backend.
struct ResolvedRequest {
    ChatRequest request;
    RenderedPrompt prompt;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string kind() const = 0;
    virtual bool deterministic() const = 0;
    /// Must return exactly request.n_samples texts or throw.
    virtual std::vector<std::string> complete(const ResolvedRequest& req) = 0;
};

/// Deterministic backend driven by a fixture file. Responses are a pure
/// function of (template_id, model, bindings, sample index): the first rule
/// whose template/model/binding constraints all match wins, its response list
/// is cycled by sample index, and `{i}` / `{<binding>}` markers are expanded.
///
/// Fixture schema:
///   { "latency_ms": 0,
///     "rules": [ { "template": "detector", "model": "optional",
///                  "binding_contains": {"news": "substr"},
///                  "binding_equals": {"news": "exact"},
///                  "responses": ["7"] } ],
///     "default": { "detector": "7", "contradiction": "yes", ... } }
class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(const std::filesystem::path& fixture_path);
    explicit ScriptedBackend(const json& fixture);

    std::string kind() const override { return "scripted"; }
    bool deterministic() const override { return true; }
    std::vector<std::string> complete(const ResolvedRequest& req) override;

private:
    struct Rule {
        std::string template_name;
        std::optional<std::string> model;
        std::vector<std::pair<std::string, std::string>> binding_contains;
        std::vector<std::pair<std::string, std::string>> binding_equals;
        std::vector<std::string> responses;
    };
    std::vector<Rule> rules_;
    std::map<std::string, std::string> defaults_;
    int latency_ms_ = 0;
};

/// Chat-completion HTTP JSON backend (messages array, temperature, n).
/// Asks for n samples in one request and tops up with sequential requests
/// when the endpoint returns fewer choices.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(ModelProfile profile, int timeout_sec = 120);

    std::string kind() const override { return "live"; }
    bool deterministic() const override { return false; }
    std::vector<std::string> complete(const ResolvedRequest& req) override;

    TokenUsage last_usage() const;

private:
    json post_once(const json& body);

    ModelProfile profile_;
    int timeout_sec_;
    mutable std::mutex mutex_;
    TokenUsage usage_{};
};

/// Test/bench backend over a plain function.
class FnBackend : public Backend {
public:
    using Fn = std::function<std::vector<std::string>(const ResolvedRequest&)>;
    FnBackend(Fn fn, bool deterministic = true) : fn_(std::move(fn)), det_(deterministic) {}
    std::string kind() const override { return "scripted"; }
    bool deterministic() const override { return det_; }
    std::vector<std::string> complete(const ResolvedRequest& req) override { return fn_(req); }

private:
    Fn fn_;
    bool det_;
};

struct RetryPolicy {
    int max_attempts = 4;
    int base_delay_ms = 250;
    int max_delay_ms = 4000;
};

struct GatewayOptions {
    std::string default_model;
    std::string cache_dir;  // empty -> caching disabled
    RetryPolicy retry;
    int max_in_flight = 8;
    bool record_calls = true;
};

struct CallRecord {
    TemplateId template_id;
    std::string model_name;
    Bindings bindings;
    int n_samples = 0;
    bool cache_hit = false;
};

class CallLog {
public:
    void append(CallRecord record);
    std::vector<CallRecord> snapshot() const;
    std::size_t count(TemplateId id) const;
    std::size_t size() const;
    void clear();

private:
    mutable std::mutex mutex_;
    std::vector<CallRecord> records_;
};

/// Single entry point for all chat-model calls: renders the prompt, applies
/// the response cache, throttles in-flight live calls, and retries transient
/// transport failures with exponential backoff.
class Gateway {
public:
    Gateway(std::shared_ptr<Backend> backend, PromptLibrary prompts, GatewayOptions options);
    ~Gateway();

    ChatResponse complete(const ChatRequest& request);

    /// Renders with an explicit template, e.g. the plain-rationale variant.
    ChatResponse complete_with(const PromptTemplate& tpl, const ChatRequest& request);

    const PromptLibrary& prompts() const { return prompts_; }
    CallLog& calls() { return call_log_; }
    Backend& backend() { return *backend_; }
    const std::string& default_model() const { return options_.default_model; }
    bool scripted() const { return backend_->deterministic(); }

private:
    ChatResponse run(const PromptTemplate& tpl, ChatRequest request);
    std::optional<ChatResponse> cache_lookup(const std::string& key) const;
    void cache_store(const std::string& key, const ChatResponse& response) const;
    static std::string cache_key(const ResolvedRequest& req);

    std::shared_ptr<Backend> backend_;
    PromptLibrary prompts_;
    GatewayOptions options_;
    CallLog call_log_;
    std::unique_ptr<class Semaphore> limiter_;
};

}  // namespace advnews
