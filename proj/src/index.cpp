#include "advnews/index.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "advnews/filters.hpp"

namespace advnews {

InvertedIndex InvertedIndex::build(const Corpus& corpus) {
    if (corpus.items.empty()) throw DataError("cannot index an empty corpus");
    InvertedIndex index;
    index.docs_ = corpus.items;
    index.corpus_hash_ = corpus.content_hash();
    index.doc_len_.reserve(index.docs_.size());

    long total_len = 0;
    for (std::size_t d = 0; d < index.docs_.size(); ++d) {
        auto tokens = tokenize(index.docs_[d].title + " " + index.docs_[d].body);
        index.doc_len_.push_back(static_cast<int>(tokens.size()));
        total_len += static_cast<long>(tokens.size());
        std::unordered_map<std::string, int> tf;
        for (auto& t : tokens) ++tf[t];
        for (auto& [term, freq] : tf)
            index.postings_[term].emplace_back(static_cast<int>(d), freq);
    }
    for (auto& [term, plist] : index.postings_)
        std::sort(plist.begin(), plist.end());
    index.avgdl_ = static_cast<double>(total_len) / static_cast<double>(index.docs_.size());
    return index;
}

std::vector<InvertedIndex::Hit> InvertedIndex::score_query(std::span<const std::string> terms,
                                                           const Bm25Params& params) const {
    const double n_docs = static_cast<double>(docs_.size());
    std::unordered_map<int, double> scores;
    for (const auto& term : terms) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const auto& plist = it->second;
        const double df = static_cast<double>(plist.size());
        // Lucene-style IDF: always positive, +0.5 smoothed
        const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
        for (const auto& [doc, tf] : plist) {
            const double dl = static_cast<double>(doc_len_[static_cast<std::size_t>(doc)]);
            const double norm = tf + params.k1 * (1.0 - params.b + params.b * dl / avgdl_);
            scores[doc] += idf * (tf * (params.k1 + 1.0)) / norm;
        }
    }
    std::vector<Hit> hits;
    hits.reserve(scores.size());
    for (const auto& [doc, score] : scores) hits.push_back({doc, score});
    std::sort(hits.begin(), hits.end(), [&](const Hit& a, const Hit& b) {
        if (a.score != b.score) return a.score > b.score;
        return docs_[static_cast<std::size_t>(a.doc)].id < docs_[static_cast<std::size_t>(b.doc)].id;
    });
    return hits;
}

void InvertedIndex::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    json meta{{"format_version", 1},
              {"doc_count", docs_.size()},
              {"vocab_size", postings_.size()},
              {"avgdl", avgdl_},
              {"corpus_hash", corpus_hash_}};
    write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");

    std::ostringstream docs_out;
    for (std::size_t d = 0; d < docs_.size(); ++d) {
        json j = docs_[d].to_json();
        j["dl"] = doc_len_[d];
        docs_out << j.dump() << "\n";
    }
    write_file_atomic(dir / "docs.jsonl", docs_out.str());

    std::ostringstream postings_out;
    for (const auto& [term, plist] : postings_) {
        json entry{{"t", term}, {"p", json::array()}};
        for (const auto& [doc, tf] : plist) entry["p"].push_back({doc, tf});
        postings_out << entry.dump() << "\n";
    }
    write_file_atomic(dir / "postings.jsonl", postings_out.str());
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& dir) {
    json meta = json::parse(read_file(dir / "meta.json"));
    InvertedIndex index;
    index.avgdl_ = meta.at("avgdl").get<double>();
    index.corpus_hash_ = meta.at("corpus_hash").get<std::string>();

    for_each_line(dir / "docs.jsonl", [&](std::size_t, const std::string& line) {
        if (trim(line).empty()) return;
        json j = json::parse(line);
        index.doc_len_.push_back(j.at("dl").get<int>());
        index.docs_.push_back(NewsItem::from_json(j));
    });
    for_each_line(dir / "postings.jsonl", [&](std::size_t, const std::string& line) {
        if (trim(line).empty()) return;
        json j = json::parse(line);
        auto& plist = index.postings_[j.at("t").get<std::string>()];
        for (const auto& pair : j.at("p"))
            plist.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
    });
    if (index.docs_.size() != meta.at("doc_count").get<std::size_t>() ||
        index.postings_.size() != meta.at("vocab_size").get<std::size_t>())
        throw DataError("index at " + dir.string() + " is inconsistent with its metadata");
    return index;
}

std::string InvertedIndex::saved_corpus_hash(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::exists(dir / "meta.json", ec)) return {};
    try {
        return json::parse(read_file(dir / "meta.json")).value("corpus_hash", std::string{});
    } catch (const std::exception&) {
        return {};
    }
}

}  // namespace advnews
