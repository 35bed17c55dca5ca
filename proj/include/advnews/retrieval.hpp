#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "advnews/gateway.hpp"
#include "advnews/index.hpp"

namespace advnews {

enum class RetrieverKind { none, local_index, web_search };

std::string retriever_kind_name(RetrieverKind kind);
RetrieverKind retriever_kind_from_name(const std::string& name);

struct RetrieverConfig {
    RetrieverKind kind = RetrieverKind::none;
    int k = 5;
    std::vector<std::string> excluded_sources;
    bool exclude_exact_seed = true;

    json to_json() const;
    static RetrieverConfig from_json(const json& j);
};

struct RetrievedDoc {
    std::string title;
    std::string snippet_or_body;
    std::string source;
    std::optional<Date> published_at;
    double score = 0.0;

    json to_json() const;
    static RetrievedDoc from_json(const json& j);
};

struct ContextBlock {
    std::vector<RetrievedDoc> docs;
    std::string rendered;

    static ContextBlock make(std::vector<RetrievedDoc> docs);

    json to_json() const;
    static ContextBlock from_json(const json& j);
};

/// One paragraph per doc ("date - title\nbody"), blank line between docs;
/// an empty block renders as "No related news stories found."
std::string format_context(const std::vector<RetrievedDoc>& docs);

class Retriever {
public:
    virtual ~Retriever() = default;
    /// `seed`, when given with cfg.exclude_exact_seed, suppresses documents
    /// whose whitespace-normalized (title, body) equals the seed's.
    virtual ContextBlock retrieve(const std::string& query, const RetrieverConfig& cfg,
                                  const NewsItem* seed) = 0;
    virtual std::string kind_name() const = 0;
};

/// BM25 top-k over a local inverted index, queried by headline. A pure
/// function of (index, query, cfg): ties break by (score desc, id asc).
class LocalRetriever : public Retriever {
public:
    explicit LocalRetriever(InvertedIndex index, Bm25Params params = {});

    ContextBlock retrieve(const std::string& query, const RetrieverConfig& cfg,
                          const NewsItem* seed) override;
    std::string kind_name() const override { return "local"; }

    const InvertedIndex& index() const { return index_; }

private:
    InvertedIndex index_;
    Bm25Params params_;
};

/// Adapter interface for web search endpoints; implementations return
/// provider-ranked results which the retriever filters and truncates.
class WebSearchProvider {
public:
    virtual ~WebSearchProvider() = default;
    virtual std::vector<RetrievedDoc> search(const std::string& query, int max_results) = 0;
};

/// Generic JSON search API over HTTPS/HTTP:
///   GET  <endpoint>?q=<query>&num=<max_results>
///   -> { "results": [ {"title","snippet","source","date"?}, ... ] }
/// Key sent as a bearer token from the configured environment variable.
class HttpSearchProvider : public WebSearchProvider {
public:
    HttpSearchProvider(std::string endpoint_url, std::string api_key_env,
                       RetryPolicy retry = {}, int timeout_sec = 30);
    std::vector<RetrievedDoc> search(const std::string& query, int max_results) override;

private:
    std::string endpoint_url_;
    std::string api_key_env_;
    RetryPolicy retry_;
    int timeout_sec_;
};

/// Replays canonical JSON fixtures for tests and offline runs:
///   { "queries": { "<query>": [ {"title","snippet","source","date"?}, ... ] } }
class ReplaySearchProvider : public WebSearchProvider {
public:
    explicit ReplaySearchProvider(const std::filesystem::path& fixture_path);
    explicit ReplaySearchProvider(const json& fixture);
    std::vector<RetrievedDoc> search(const std::string& query, int max_results) override;

    int calls() const { return calls_.load(); }

private:
    std::map<std::string, std::vector<RetrievedDoc>> queries_;
    std::atomic<int> calls_{0};
};

/// Web retrieval with per-(query, day) response caching and post-fetch
/// exclusion filtering.
class WebRetriever : public Retriever {
public:
    WebRetriever(std::shared_ptr<WebSearchProvider> provider, std::string cache_dir,
                 std::string day);

    ContextBlock retrieve(const std::string& query, const RetrieverConfig& cfg,
                          const NewsItem* seed) override;
    std::string kind_name() const override { return "web"; }

    struct Stats {
        int provider_calls = 0;
        int cache_hits = 0;
    };
    Stats stats() const;

private:
    std::shared_ptr<WebSearchProvider> provider_;
    std::string cache_dir_;
    std::string day_;
    mutable std::mutex mutex_;
    Stats stats_{};
};

/// Wraps another retriever and counts calls; used to assert the loop's
/// one-retrieval-per-round economy.
class CountingRetriever : public Retriever {
public:
    explicit CountingRetriever(Retriever& inner) : inner_(inner) {}
    ContextBlock retrieve(const std::string& query, const RetrieverConfig& cfg,
                          const NewsItem* seed) override {
        ++count_;
        return inner_.retrieve(query, cfg, seed);
    }
    std::string kind_name() const override { return inner_.kind_name(); }
    int count() const { return count_.load(); }
    void reset() { count_ = 0; }

private:
    Retriever& inner_;
    std::atomic<int> count_{0};
};

}  // namespace advnews
