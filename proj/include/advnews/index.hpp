#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "advnews/corpus.hpp"

namespace advnews {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Inverted index over the lowercased, punctuation-stripped tokens of
/// title+body. Immutable after build; concurrent queries are safe. Persisted
/// as a self-describing directory (meta.json, docs.jsonl, postings.jsonl)
/// keyed by the corpus content hash; rebuilds are deterministic.
class InvertedIndex {
public:
    static InvertedIndex build(const Corpus& corpus);

    void save(const std::filesystem::path& dir) const;
    static InvertedIndex load(const std::filesystem::path& dir);

    /// Content hash of a previously saved index, empty when absent/invalid.
    static std::string saved_corpus_hash(const std::filesystem::path& dir);

    struct Hit {
        int doc = 0;
        double score = 0.0;
    };

    /// BM25 scores for every document matching at least one query term,
    /// ordered by (score desc, doc id asc).
    std::vector<Hit> score_query(std::span<const std::string> terms, const Bm25Params& params) const;

    const NewsItem& doc(int i) const { return docs_.at(static_cast<std::size_t>(i)); }
    std::size_t doc_count() const { return docs_.size(); }
    std::size_t vocab_size() const { return postings_.size(); }
    double avg_doc_len() const { return avgdl_; }
    const std::string& corpus_hash() const { return corpus_hash_; }

private:
    std::vector<NewsItem> docs_;
    std::vector<int> doc_len_;
    double avgdl_ = 0.0;
    // term -> (doc, term frequency), docs ascending; std::map keeps the
    // persisted postings order deterministic
    std::map<std::string, std::vector<std::pair<int, int>>> postings_;
    std::string corpus_hash_;
};

}  // namespace advnews
