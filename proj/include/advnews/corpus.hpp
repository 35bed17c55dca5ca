#pragma once

#include <optional>
#include <string>
#include <vector>

#include "advnews/util.hpp"

namespace advnews {

// ---------------------------------------------------------------------------
// A news corpus is a newline-delimited file of JSON records, one per line:
//   id, title, body, source, published_at (ISO-8601 date), url?, domain_tag?
// Labeled datasets add: label (0|1), origin, pair_id?  (and optionally round).
// ---------------------------------------------------------------------------

struct NewsItem {
    std::string id;
    std::string title;
    std::string body;
    std::string source;
    Date published_at;
    std::optional<std::string> url;
    std::optional<std::string> domain_tag;

    json to_json() const;
    static NewsItem from_json(const json& j);

    /// The text form handed to prompts: headline, newline, body.
    std::string full_text() const { return title + "\n" + body; }

    /// Whitespace-normalized (title, body) key used for exact-duplicate checks.
    std::string dedup_key() const;
};

enum class Origin { seed, generated, imported };

std::string origin_name(Origin o);
Origin origin_from_name(const std::string& name);

struct LabeledNews {
    NewsItem item;
    int label = 1;  // 1 = true news, 0 = fake news
    Origin origin = Origin::imported;
    std::optional<std::string> pair_id;
    std::optional<int> round;  // generation round, present in per-round emissions

    json to_json() const;
    static LabeledNews from_json(const json& j);
};

enum class DedupPolicy { none, exact_title_body };

struct CorpusManifest {
    std::string path;
    std::size_t item_count = 0;
    Date min_date;
    Date max_date;
    DedupPolicy dedup_policy = DedupPolicy::none;
    std::vector<std::string> excluded_sources;

    json to_json() const;
};

/// An immutable, loaded corpus: items plus the manifest describing them.
/// Loading is single-threaded; a loaded corpus may be shared across readers.
struct Corpus {
    std::vector<NewsItem> items;
    CorpusManifest manifest;
    std::size_t malformed_count = 0;
    std::vector<std::string> issues;  // "line N: why", one per skipped record

    /// SHA-256 over the canonical serialization of all items, in order.
    std::string content_hash() const;
};

/// Loads a corpus file, optionally restricted to [range.first, range.second].
/// Malformed lines are skipped, counted, and reported in `issues`; throws
/// DataError on an unreadable file or when no valid record survives.
Corpus load_corpus(const std::filesystem::path& path,
                   std::optional<std::pair<Date, Date>> date_range = std::nullopt);

/// Writes items in the corpus file format and returns the updated corpus
/// whose manifest points at `path`.
Corpus write_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Drops every item whose whitespace-normalized (title, body) equals a seed's
/// and every item whose source matches `excluded_sources` case-insensitively.
/// Order is preserved; the result is idempotent under re-application.
Corpus dedup_and_exclude(const Corpus& corpus, const std::vector<NewsItem>& seeds,
                         const std::vector<std::string>& excluded_sources);

/// Uniform sample of n items without replacement, deterministic per rng_seed.
std::vector<NewsItem> sample_seeds(const Corpus& corpus, std::size_t n, std::uint64_t rng_seed);

// Labeled dataset files share the corpus line format plus label fields.
std::vector<LabeledNews> load_labeled(const std::filesystem::path& path);
void write_labeled(const std::vector<LabeledNews>& rows, const std::filesystem::path& path);

}  // namespace advnews
