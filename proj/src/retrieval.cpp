#include "advnews/retrieval.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

#include <httplib.h>

#include "advnews/filters.hpp"

namespace advnews {

std::string retriever_kind_name(RetrieverKind kind) {
    switch (kind) {
        case RetrieverKind::none: return "none";
        case RetrieverKind::local_index: return "local";
        case RetrieverKind::web_search: return "web";
    }
    return "none";
}

RetrieverKind retriever_kind_from_name(const std::string& name) {
    if (name == "none") return RetrieverKind::none;
    if (name == "local" || name == "local_index") return RetrieverKind::local_index;
    if (name == "web" || name == "web_search") return RetrieverKind::web_search;
    throw ConfigError("unknown retriever kind '" + name + "'");
}

json RetrieverConfig::to_json() const {
    return json{{"kind", retriever_kind_name(kind)},
                {"k", k},
                {"excluded_sources", excluded_sources},
                {"exclude_exact_seed", exclude_exact_seed}};
}

RetrieverConfig RetrieverConfig::from_json(const json& j) {
    RetrieverConfig cfg;
    cfg.kind = retriever_kind_from_name(j.value("kind", std::string("none")));
    cfg.k = j.value("k", 5);
    if (j.contains("excluded_sources"))
        cfg.excluded_sources = j["excluded_sources"].get<std::vector<std::string>>();
    cfg.exclude_exact_seed = j.value("exclude_exact_seed", true);
    if (cfg.kind != RetrieverKind::none && cfg.k < 1)
        throw ConfigError("retriever k must be >= 1");
    return cfg;
}

json RetrievedDoc::to_json() const {
    json j{{"title", title},
           {"snippet_or_body", snippet_or_body},
           {"source", source},
           {"score", score}};
    if (published_at) j["published_at"] = published_at->to_string();
    return j;
}

RetrievedDoc RetrievedDoc::from_json(const json& j) {
    RetrievedDoc d;
    d.title = j.at("title").get<std::string>();
    d.snippet_or_body = j.value("snippet_or_body", j.value("snippet", std::string{}));
    d.source = j.value("source", std::string{});
    d.score = j.value("score", 0.0);
    if (j.contains("published_at") && !j["published_at"].is_null())
        d.published_at = Date::parse(j["published_at"].get<std::string>());
    else if (j.contains("date") && !j["date"].is_null())
        d.published_at = Date::parse(j["date"].get<std::string>());
    if (d.snippet_or_body.empty()) throw DataError("retrieved doc with empty content");
    return d;
}

std::string format_context(const std::vector<RetrievedDoc>& docs) {
    if (docs.empty()) return "No related news stories found.";
    std::string out;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (i > 0) out += "\n\n";
        if (docs[i].published_at) {
            out += docs[i].published_at->to_string();
            out += " - ";
        }
        out += docs[i].title;
        out += "\n";
        out += docs[i].snippet_or_body;
    }
    return out;
}

ContextBlock ContextBlock::make(std::vector<RetrievedDoc> docs) {
    ContextBlock block;
    block.docs = std::move(docs);
    block.rendered = format_context(block.docs);
    return block;
}

json ContextBlock::to_json() const {
    json arr = json::array();
    for (const auto& d : docs) arr.push_back(d.to_json());
    return json{{"docs", arr}, {"rendered", rendered}};
}

ContextBlock ContextBlock::from_json(const json& j) {
    std::vector<RetrievedDoc> docs;
    for (const auto& d : j.at("docs")) docs.push_back(RetrievedDoc::from_json(d));
    ContextBlock block = make(std::move(docs));
    return block;
}

namespace {

bool source_excluded(const std::string& source, const std::vector<std::string>& excluded) {
    return std::any_of(excluded.begin(), excluded.end(),
                       [&](const std::string& e) { return iequals(e, source); });
}

bool matches_seed(const RetrievedDoc& doc, const NewsItem& seed) {
    return normalize_ws(doc.title) == normalize_ws(seed.title) &&
           normalize_ws(doc.snippet_or_body) == normalize_ws(seed.body);
}

}  // namespace

// ---------------------------------------------------------------------------
// LocalRetriever
// ---------------------------------------------------------------------------

LocalRetriever::LocalRetriever(InvertedIndex index, Bm25Params params)
    : index_(std::move(index)), params_(params) {}

ContextBlock LocalRetriever::retrieve(const std::string& query, const RetrieverConfig& cfg,
                                      const NewsItem* seed) {
    auto terms = tokenize(query);
    auto hits = index_.score_query(terms, params_);
    std::vector<RetrievedDoc> docs;
    for (const auto& hit : hits) {
        if (static_cast<int>(docs.size()) == cfg.k) break;
        const NewsItem& item = index_.doc(hit.doc);
        if (source_excluded(item.source, cfg.excluded_sources)) continue;
        if (cfg.exclude_exact_seed && seed && item.dedup_key() == seed->dedup_key()) continue;
        RetrievedDoc doc;
        doc.title = item.title;
        doc.snippet_or_body = item.body;
        doc.source = item.source;
        doc.published_at = item.published_at;
        doc.score = hit.score;
        docs.push_back(std::move(doc));
    }
    return ContextBlock::make(std::move(docs));
}

// ---------------------------------------------------------------------------
// Web search
// ---------------------------------------------------------------------------

HttpSearchProvider::HttpSearchProvider(std::string endpoint_url, std::string api_key_env,
                                       RetryPolicy retry, int timeout_sec)
    : endpoint_url_(std::move(endpoint_url)),
      api_key_env_(std::move(api_key_env)),
      retry_(retry),
      timeout_sec_(timeout_sec) {}

std::vector<RetrievedDoc> HttpSearchProvider::search(const std::string& query, int max_results) {
    auto scheme_end = endpoint_url_.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("web search endpoint missing scheme: " + endpoint_url_);
    auto path_start = endpoint_url_.find('/', scheme_end + 3);
    std::string base = path_start == std::string::npos ? endpoint_url_
                                                       : endpoint_url_.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : endpoint_url_.substr(path_start);

    httplib::Client client(base);
    client.set_connection_timeout(timeout_sec_);
    client.set_read_timeout(timeout_sec_);
    httplib::Headers headers;
    if (!api_key_env_.empty()) {
        const char* key = std::getenv(api_key_env_.c_str());
        if (!key || !*key) throw ConfigError("web search key env var " + api_key_env_ + " is not set");
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    httplib::Params params{{"q", query}, {"num", std::to_string(max_results)}};

    int attempt = 0;
    for (;;) {
        ++attempt;
        auto result = client.Get(path, params, headers);
        if (!result || result->status == 429 || result->status >= 500) {
            if (attempt >= retry_.max_attempts) {
                std::string why = !result ? httplib::to_string(result.error())
                                          : "status " + std::to_string(result->status);
                throw GatewayError("web search retry budget exhausted: " + why);
            }
            long delay = retry_.base_delay_ms;
            for (int i = 1; i < attempt; ++i) delay *= 2;
            std::this_thread::sleep_for(
                std::chrono::milliseconds(std::min<long>(delay, retry_.max_delay_ms)));
            continue;
        }
        if (result->status != 200)
            throw GatewayError("web search status " + std::to_string(result->status) + ": " +
                               result->body.substr(0, 200));
        json reply = json::parse(result->body);
        std::vector<RetrievedDoc> docs;
        for (const auto& r : reply.value("results", json::array())) {
            try {
                docs.push_back(RetrievedDoc::from_json(r));
            } catch (const std::exception&) {
                // provider rows without usable content are skipped
            }
            if (static_cast<int>(docs.size()) == max_results) break;
        }
        return docs;
    }
}

ReplaySearchProvider::ReplaySearchProvider(const std::filesystem::path& fixture_path)
    : ReplaySearchProvider(json::parse(read_file(fixture_path))) {}

ReplaySearchProvider::ReplaySearchProvider(const json& fixture) {
    for (auto& [query, results] : fixture.at("queries").items()) {
        auto& docs = queries_[query];
        for (const auto& r : results) docs.push_back(RetrievedDoc::from_json(r));
    }
}

std::vector<RetrievedDoc> ReplaySearchProvider::search(const std::string& query, int max_results) {
    ++calls_;
    auto it = queries_.find(query);
    if (it == queries_.end()) return {};
    auto docs = it->second;
    if (static_cast<int>(docs.size()) > max_results)
        docs.resize(static_cast<std::size_t>(max_results));
    return docs;
}

// ---------------------------------------------------------------------------
// WebRetriever
// ---------------------------------------------------------------------------

WebRetriever::WebRetriever(std::shared_ptr<WebSearchProvider> provider, std::string cache_dir,
                           std::string day)
    : provider_(std::move(provider)), cache_dir_(std::move(cache_dir)), day_(std::move(day)) {}

ContextBlock WebRetriever::retrieve(const std::string& query, const RetrieverConfig& cfg,
                                    const NewsItem* seed) {
    const int fetch = std::max(cfg.k * 2, 10);  // headroom for post-fetch exclusion
    std::vector<RetrievedDoc> raw;
    bool served_from_cache = false;

    std::filesystem::path cache_path;
    if (!cache_dir_.empty()) {
        cache_path = std::filesystem::path(cache_dir_) /
                     (Sha256::hex("web|" + day_ + "|" + std::to_string(fetch) + "|" + query) + ".json");
        std::error_code ec;
        if (std::filesystem::exists(cache_path, ec)) {
            try {
                json j = json::parse(read_file(cache_path));
                for (const auto& d : j.at("results")) raw.push_back(RetrievedDoc::from_json(d));
                served_from_cache = true;
            } catch (const std::exception&) {
                raw.clear();
            }
        }
    }
    if (!served_from_cache) {
        raw = provider_->search(query, fetch);
        if (!cache_dir_.empty()) {
            json j{{"query", query}, {"day", day_}, {"results", json::array()}};
            for (const auto& d : raw) j["results"].push_back(d.to_json());
            write_file_atomic(cache_path, j.dump());
        }
    }
    {
        std::lock_guard lock(mutex_);
        if (served_from_cache)
            ++stats_.cache_hits;
        else
            ++stats_.provider_calls;
    }

    std::vector<RetrievedDoc> docs;
    for (auto& doc : raw) {
        if (static_cast<int>(docs.size()) == cfg.k) break;
        if (source_excluded(doc.source, cfg.excluded_sources)) continue;
        if (cfg.exclude_exact_seed && seed && matches_seed(doc, *seed)) continue;
        docs.push_back(std::move(doc));
    }
    return ContextBlock::make(std::move(docs));
}

WebRetriever::Stats WebRetriever::stats() const {
    std::lock_guard lock(mutex_);
    return stats_;
}

}  // namespace advnews
