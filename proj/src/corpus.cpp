#include "advnews/corpus.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace advnews {

namespace {

std::string require_string(const json& j, const char* field) {
    auto it = j.find(field);
    if (it == j.end() || !it->is_string()) throw DataError(std::string("missing required field '") + field + "'");
    return it->get<std::string>();
}

std::optional<std::string> optional_string(const json& j, const char* field) {
    auto it = j.find(field);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw DataError(std::string("field '") + field + "' must be a string");
    return it->get<std::string>();
}

}  // namespace

json NewsItem::to_json() const {
    json j{{"id", id},
           {"title", title},
           {"body", body},
           {"source", source},
           {"published_at", published_at.to_string()}};
    if (url) j["url"] = *url;
    if (domain_tag) j["domain_tag"] = *domain_tag;
    return j;
}

NewsItem NewsItem::from_json(const json& j) {
    NewsItem item;
    item.id = require_string(j, "id");
    item.title = require_string(j, "title");
    item.body = require_string(j, "body");
    item.source = require_string(j, "source");
    auto date = Date::parse(require_string(j, "published_at"));
    if (!date) throw DataError("invalid published_at date");
    item.published_at = *date;
    item.url = optional_string(j, "url");
    item.domain_tag = optional_string(j, "domain_tag");
    if (trim(item.title).empty()) throw DataError("empty title");
    if (trim(item.body).empty()) throw DataError("empty body");
    return item;
}

std::string NewsItem::dedup_key() const {
    return normalize_ws(title) + "\x1f" + normalize_ws(body);
}

std::string origin_name(Origin o) {
    switch (o) {
        case Origin::seed: return "seed";
        case Origin::generated: return "generated";
        case Origin::imported: return "imported";
    }
    return "imported";
}

Origin origin_from_name(const std::string& name) {
    if (name == "seed") return Origin::seed;
    if (name == "generated") return Origin::generated;
    if (name == "imported") return Origin::imported;
    throw DataError("unknown origin '" + name + "'");
}

json LabeledNews::to_json() const {
    json j = item.to_json();
    j["label"] = label;
    j["origin"] = origin_name(origin);
    if (pair_id) j["pair_id"] = *pair_id;
    if (round) j["round"] = *round;
    return j;
}

LabeledNews LabeledNews::from_json(const json& j) {
    LabeledNews row;
    row.item = NewsItem::from_json(j);
    if (!j.contains("label") || !j["label"].is_number_integer())
        throw DataError("missing required field 'label'");
    row.label = j["label"].get<int>();
    if (row.label != 0 && row.label != 1) throw DataError("label must be 0 or 1");
    row.origin = origin_from_name(j.value("origin", std::string("imported")));
    row.pair_id = optional_string(j, "pair_id");
    if (j.contains("round") && !j["round"].is_null()) row.round = j["round"].get<int>();
    if (row.origin == Origin::generated && !row.pair_id)
        throw DataError("generated record lacks pair_id");
    return row;
}

json CorpusManifest::to_json() const {
    return json{{"path", path},
                {"item_count", item_count},
                {"date_range", {min_date.to_string(), max_date.to_string()}},
                {"dedup_policy", dedup_policy == DedupPolicy::none ? "none" : "exact_title_body"},
                {"excluded_sources", excluded_sources}};
}

std::string Corpus::content_hash() const {
    Sha256 h;
    for (const auto& item : items) {
        std::string line = item.to_json().dump();
        h.update(line);
        h.update("\n");
    }
    auto digest = h.finish();
    static const char* hexdig = "0123456789abcdef";
    std::string out;
    for (std::uint8_t b : digest) {
        out.push_back(hexdig[b >> 4]);
        out.push_back(hexdig[b & 0xf]);
    }
    return out;
}

namespace {

void finalize_manifest(Corpus& corpus, const std::string& path) {
    corpus.manifest.path = path;
    corpus.manifest.item_count = corpus.items.size();
    if (!corpus.items.empty()) {
        auto [lo, hi] = std::minmax_element(
            corpus.items.begin(), corpus.items.end(),
            [](const NewsItem& a, const NewsItem& b) { return a.published_at < b.published_at; });
        corpus.manifest.min_date = lo->published_at;
        corpus.manifest.max_date = hi->published_at;
    }
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path,
                   std::optional<std::pair<Date, Date>> date_range) {
    Corpus corpus;
    std::unordered_set<std::string> seen_ids;
    for_each_line(path, [&](std::size_t line_no, const std::string& line) {
        if (trim(line).empty()) return;
        try {
            json j = json::parse(line);
            NewsItem item = NewsItem::from_json(j);
            if (!seen_ids.insert(item.id).second)
                throw DataError("duplicate id '" + item.id + "'");
            if (date_range &&
                (item.published_at < date_range->first || date_range->second < item.published_at))
                return;
            corpus.items.push_back(std::move(item));
        } catch (const std::exception& e) {
            ++corpus.malformed_count;
            corpus.issues.push_back("line " + std::to_string(line_no) + ": " + e.what());
        }
    });
    if (corpus.items.empty())
        throw DataError("no valid records in " + path.string() +
                        (corpus.malformed_count
                             ? " (" + std::to_string(corpus.malformed_count) + " malformed)"
                             : ""));
    finalize_manifest(corpus, path.string());
    return corpus;
}

Corpus write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& item : corpus.items) out << item.to_json().dump() << "\n";
    write_file_atomic(path, out.str());
    Corpus result = corpus;
    result.malformed_count = 0;
    result.issues.clear();
    finalize_manifest(result, path.string());
    return result;
}

Corpus dedup_and_exclude(const Corpus& corpus, const std::vector<NewsItem>& seeds,
                         const std::vector<std::string>& excluded_sources) {
    std::unordered_set<std::string> seed_keys;
    for (const auto& s : seeds) seed_keys.insert(s.dedup_key());
    std::vector<std::string> excluded_lower;
    excluded_lower.reserve(excluded_sources.size());
    for (const auto& s : excluded_sources) excluded_lower.push_back(to_lower(s));

    Corpus result;
    result.manifest = corpus.manifest;
    result.manifest.dedup_policy = DedupPolicy::exact_title_body;
    result.manifest.excluded_sources = excluded_sources;
    for (const auto& item : corpus.items) {
        if (seed_keys.count(item.dedup_key())) continue;
        std::string source_lower = to_lower(item.source);
        if (std::find(excluded_lower.begin(), excluded_lower.end(), source_lower) !=
            excluded_lower.end())
            continue;
        result.items.push_back(item);
    }
    finalize_manifest(result, corpus.manifest.path);
    return result;
}

std::vector<NewsItem> sample_seeds(const Corpus& corpus, std::size_t n, std::uint64_t rng_seed) {
    auto idx = sample_indices(corpus.items.size(), n, rng_seed);
    std::vector<NewsItem> out;
    out.reserve(n);
    for (std::size_t i : idx) out.push_back(corpus.items[i]);
    return out;
}

std::vector<LabeledNews> load_labeled(const std::filesystem::path& path) {
    std::vector<LabeledNews> rows;
    std::vector<std::string> issues;
    for_each_line(path, [&](std::size_t line_no, const std::string& line) {
        if (trim(line).empty()) return;
        try {
            rows.push_back(LabeledNews::from_json(json::parse(line)));
        } catch (const std::exception& e) {
            issues.push_back("line " + std::to_string(line_no) + ": " + e.what());
        }
    });
    if (rows.empty())
        throw DataError("no valid labeled records in " + path.string() +
                        (issues.empty() ? "" : " (first issue: " + issues.front() + ")"));
    return rows;
}

void write_labeled(const std::vector<LabeledNews>& rows, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& row : rows) out << row.to_json().dump() << "\n";
    write_file_atomic(path, out.str());
}

}  // namespace advnews
