#include "advnews/gateway.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <thread>

#include <httplib.h>

namespace advnews {

json ModelProfile::to_json() const {
    json j{{"model_name", model_name}, {"endpoint_url", endpoint_url}, {"auth_env_var", auth_env_var}};
    if (knowledge_cutoff) j["knowledge_cutoff"] = knowledge_cutoff->to_string();
    return j;
}

ModelProfile ModelProfile::from_json(const json& j) {
    ModelProfile p;
    p.model_name = j.value("model_name", j.value("model", std::string{}));
    p.endpoint_url = j.value("endpoint_url", j.value("endpoint", std::string{}));
    p.auth_env_var = j.value("auth_env_var", j.value("auth_env", std::string{}));
    if (j.contains("knowledge_cutoff") && !j["knowledge_cutoff"].is_null()) {
        auto d = Date::parse(j["knowledge_cutoff"].get<std::string>());
        if (!d) throw ConfigError("invalid knowledge_cutoff date");
        p.knowledge_cutoff = *d;
    }
    return p;
}

// ---------------------------------------------------------------------------
// ScriptedBackend
// ---------------------------------------------------------------------------

ScriptedBackend::ScriptedBackend(const std::filesystem::path& fixture_path)
    : ScriptedBackend(json::parse(read_file(fixture_path))) {}

ScriptedBackend::ScriptedBackend(const json& fixture) {
    latency_ms_ = fixture.value("latency_ms", 0);
    if (fixture.contains("default")) {
        for (auto& [k, v] : fixture["default"].items())
            defaults_[k] = v.get<std::string>();
    }
    for (const auto& jr : fixture.value("rules", json::array())) {
        Rule rule;
        rule.template_name = jr.at("template").get<std::string>();
        template_from_name(rule.template_name);  // validate early
        if (jr.contains("model")) rule.model = jr["model"].get<std::string>();
        if (jr.contains("binding_contains"))
            for (auto& [k, v] : jr["binding_contains"].items())
                rule.binding_contains.emplace_back(k, v.get<std::string>());
        if (jr.contains("binding_equals"))
            for (auto& [k, v] : jr["binding_equals"].items())
                rule.binding_equals.emplace_back(k, v.get<std::string>());
        for (const auto& r : jr.at("responses")) rule.responses.push_back(r.get<std::string>());
        if (rule.responses.empty()) throw ConfigError("scripted rule with no responses");
        rules_.push_back(std::move(rule));
    }
}

std::vector<std::string> ScriptedBackend::complete(const ResolvedRequest& req) {
    if (latency_ms_ > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(latency_ms_));

    const std::string tpl = template_name(req.request.template_id);
    const Rule* hit = nullptr;
    for (const auto& rule : rules_) {
        if (rule.template_name != tpl) continue;
        if (rule.model && *rule.model != req.request.model_name) continue;
        bool ok = true;
        for (const auto& [k, needle] : rule.binding_contains) {
            auto it = req.request.bindings.find(k);
            if (it == req.request.bindings.end() || it->second.find(needle) == std::string::npos) {
                ok = false;
                break;
            }
        }
        if (ok)
            for (const auto& [k, exact] : rule.binding_equals) {
                auto it = req.request.bindings.find(k);
                if (it == req.request.bindings.end() || it->second != exact) {
                    ok = false;
                    break;
                }
            }
        if (ok) {
            hit = &rule;
            break;
        }
    }

    auto expand = [&](std::string text, int i) {
        auto replace_all = [](std::string& s, const std::string& from, const std::string& to) {
            std::size_t pos = 0;
            while ((pos = s.find(from, pos)) != std::string::npos) {
                s.replace(pos, from.size(), to);
                pos += to.size();
            }
        };
        replace_all(text, "{i}", std::to_string(i));
        for (const auto& [k, v] : req.request.bindings) replace_all(text, "{" + k + "}", v);
        return text;
    };

    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(req.request.n_samples));
    for (int i = 0; i < req.request.n_samples; ++i) {
        if (hit) {
            out.push_back(expand(hit->responses[static_cast<std::size_t>(i) % hit->responses.size()], i));
        } else {
            auto it = defaults_.find(tpl);
            if (it == defaults_.end())
                throw GatewayError("no scripted response for template '" + tpl + "'");
            out.push_back(expand(it->second, i));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// HttpBackend
// ---------------------------------------------------------------------------

namespace {

struct ParsedUrl {
    std::string scheme_host;  // e.g. "http://host:8080"
    std::string path;         // e.g. "/v1/chat/completions"
};

ParsedUrl parse_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint url missing scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpBackend::HttpBackend(ModelProfile profile, int timeout_sec)
    : profile_(std::move(profile)), timeout_sec_(timeout_sec) {
    if (profile_.endpoint_url.empty()) throw ConfigError("live backend requires an endpoint url");
}

json HttpBackend::post_once(const json& body) {
    ParsedUrl url = parse_url(profile_.endpoint_url);
    httplib::Client client(url.scheme_host);
    client.set_connection_timeout(timeout_sec_);
    client.set_read_timeout(timeout_sec_);
    if (const char* proxy = std::getenv("http_proxy"); proxy && *proxy) {
        ParsedUrl p = parse_url(proxy);
        auto host = p.scheme_host.substr(p.scheme_host.find("://") + 3);
        auto colon = host.rfind(':');
        if (colon != std::string::npos) {
            client.set_proxy(host.substr(0, colon), std::stoi(host.substr(colon + 1)));
        }
    }

    httplib::Headers headers{{"Content-Type", "application/json"}};
    if (!profile_.auth_env_var.empty()) {
        const char* key = std::getenv(profile_.auth_env_var.c_str());
        if (!key || !*key)
            throw ConfigError("auth env var " + profile_.auth_env_var + " is not set");
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    auto result = client.Post(url.path, headers, body.dump(), "application/json");
    if (!result)
        throw TransientGatewayError("transport failure: " + httplib::to_string(result.error()));
    if (result->status == 429 || result->status >= 500)
        throw TransientGatewayError("remote status " + std::to_string(result->status) + ": " +
                                    result->body.substr(0, 200));
    if (result->status != 200)
        throw GatewayError("remote status " + std::to_string(result->status) + ": " +
                           result->body.substr(0, 200));
    try {
        return json::parse(result->body);
    } catch (const std::exception& e) {
        throw GatewayError(std::string("unparseable endpoint response: ") + e.what());
    }
}

std::vector<std::string> HttpBackend::complete(const ResolvedRequest& req) {
    std::vector<std::string> texts;
    int remaining = req.request.n_samples;
    bool first = true;
    while (remaining > 0) {
        json messages = json::array();
        if (!req.prompt.system_text.empty())
            messages.push_back({{"role", "system"}, {"content", req.prompt.system_text}});
        messages.push_back({{"role", "user"}, {"content", req.prompt.user_text}});
        json body{{"model", req.request.model_name},
                  {"messages", messages},
                  {"temperature", req.request.temperature},
                  {"max_tokens", req.request.max_output},
                  {"n", first ? remaining : 1}};
        json reply = post_once(body);
        if (!reply.contains("choices") || reply["choices"].empty())
            throw GatewayError("endpoint reply has no choices");
        for (const auto& choice : reply["choices"]) {
            texts.push_back(choice.at("message").at("content").get<std::string>());
            if (static_cast<int>(texts.size()) == req.request.n_samples) break;
        }
        if (reply.contains("usage")) {
            std::lock_guard lock(mutex_);
            usage_.prompt_tokens += reply["usage"].value("prompt_tokens", 0L);
            usage_.completion_tokens += reply["usage"].value("completion_tokens", 0L);
        }
        remaining = req.request.n_samples - static_cast<int>(texts.size());
        first = false;
    }
    return texts;
}

TokenUsage HttpBackend::last_usage() const {
    std::lock_guard lock(mutex_);
    return usage_;
}

// ---------------------------------------------------------------------------
// CallLog
// ---------------------------------------------------------------------------

void CallLog::append(CallRecord record) {
    std::lock_guard lock(mutex_);
    records_.push_back(std::move(record));
}

std::vector<CallRecord> CallLog::snapshot() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::size_t CallLog::count(TemplateId id) const {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& r : records_)
        if (r.template_id == id) ++n;
    return n;
}

std::size_t CallLog::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

void CallLog::clear() {
    std::lock_guard lock(mutex_);
    records_.clear();
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

/// Runtime-sized counting semaphore bounding in-flight backend calls.
class Semaphore {
public:
    explicit Semaphore(int count) : count_(count) {}
    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return count_ > 0; });
        --count_;
    }
    void release() {
        {
            std::lock_guard lock(mutex_);
            ++count_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int count_;
};

Gateway::Gateway(std::shared_ptr<Backend> backend, PromptLibrary prompts, GatewayOptions options)
    : backend_(std::move(backend)),
      prompts_(std::move(prompts)),
      options_(std::move(options)),
      limiter_(std::make_unique<Semaphore>(std::max(1, options_.max_in_flight))) {}

Gateway::~Gateway() = default;

std::string Gateway::cache_key(const ResolvedRequest& req) {
    json key{{"model", req.request.model_name},
             {"template", template_name(req.request.template_id)},
             {"system", req.prompt.system_text},
             {"user", req.prompt.user_text},
             {"temperature", req.request.temperature},
             {"n", req.request.n_samples},
             {"max_output", req.request.max_output}};
    return Sha256::hex(key.dump());
}

std::optional<ChatResponse> Gateway::cache_lookup(const std::string& key) const {
    std::filesystem::path path =
        std::filesystem::path(options_.cache_dir) / key.substr(0, 2) / (key + ".json");
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    try {
        json j = json::parse(read_file(path));
        ChatResponse resp;
        resp.texts = j.at("texts").get<std::vector<std::string>>();
        resp.usage.prompt_tokens = j.value("prompt_tokens", 0L);
        resp.usage.completion_tokens = j.value("completion_tokens", 0L);
        resp.backend = backend_->kind();
        resp.cache_hit = true;
        return resp;
    } catch (const std::exception&) {
        return std::nullopt;  // corrupt entry, fall through to the backend
    }
}

void Gateway::cache_store(const std::string& key, const ChatResponse& response) const {
    std::filesystem::path path =
        std::filesystem::path(options_.cache_dir) / key.substr(0, 2) / (key + ".json");
    json j{{"texts", response.texts},
           {"prompt_tokens", response.usage.prompt_tokens},
           {"completion_tokens", response.usage.completion_tokens}};
    write_file_atomic(path, j.dump());
}

ChatResponse Gateway::complete(const ChatRequest& request) {
    return run(prompts_.get(request.template_id), request);
}

ChatResponse Gateway::complete_with(const PromptTemplate& tpl, const ChatRequest& request) {
    if (tpl.id != request.template_id)
        throw GatewayError("template id mismatch between prompt and request");
    return run(tpl, request);
}

ChatResponse Gateway::run(const PromptTemplate& tpl, ChatRequest request) {
    if (request.n_samples < 1) throw GatewayError("n_samples must be >= 1");
    if (!std::isfinite(request.temperature) || request.temperature < 0)
        throw GatewayError("temperature must be finite and >= 0");
    if (request.model_name.empty()) request.model_name = options_.default_model;

    ResolvedRequest resolved{request, render_prompt(tpl, request.bindings)};

    const bool cacheable =
        !options_.cache_dir.empty() && (request.temperature == 0.0 || backend_->deterministic());
    std::string key;
    if (cacheable) {
        key = cache_key(resolved);
        if (auto hit = cache_lookup(key)) {
            if (options_.record_calls)
                call_log_.append({request.template_id, request.model_name, request.bindings,
                                  request.n_samples, true});
            return *hit;
        }
    }

    ChatResponse response;
    response.backend = backend_->kind();
    int attempt = 0;
    for (;;) {
        ++attempt;
        try {
            limiter_->acquire();
            struct Releaser {
                Semaphore* s;
                ~Releaser() { s->release(); }
            } releaser{limiter_.get()};
            response.texts = backend_->complete(resolved);
            break;
        } catch (const TransientGatewayError& e) {
            if (attempt >= options_.retry.max_attempts)
                throw GatewayError(std::string("retry budget exhausted: ") + e.what());
            long delay = options_.retry.base_delay_ms;
            for (int i = 1; i < attempt; ++i) delay *= 2;
            delay = std::min<long>(delay, options_.retry.max_delay_ms);
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
    }
    if (static_cast<int>(response.texts.size()) != request.n_samples)
        throw GatewayError("backend returned " + std::to_string(response.texts.size()) +
                           " texts, expected " + std::to_string(request.n_samples));

    if (cacheable) cache_store(key, response);
    if (options_.record_calls)
        call_log_.append({request.template_id, request.model_name, request.bindings,
                          request.n_samples, false});
    return response;
}

}  // namespace advnews
