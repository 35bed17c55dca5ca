#pragma once

#include <span>
#include <string>
#include <vector>

#include "advnews/corpus.hpp"
#include "advnews/gateway.hpp"

namespace advnews {

/// Lowercases, splits on whitespace, and strips leading/trailing ASCII
/// punctuation from each token; tokens that become empty are dropped.
std::vector<std::string> tokenize(std::string_view text);

/// Token-level Levenshtein distance (insert/delete/substitute), O(|a|*|b|)
/// time, O(min(|a|,|b|)) space.
int levenshtein_tokens(std::span<const std::string> a, std::span<const std::string> b);

struct EditMetrics {
    int token_distance = 0;
    double overlap_ratio = 1.0;  // 1 - distance / max(|a|, |b|, 1)
    bool within_limit = true;    // overlap_ratio strictly greater than the threshold

    json to_json() const;
    static EditMetrics from_json(const json& j);
};

/// Token overlap between original and candidate; the limit check is a strict
/// inequality, so an overlap of exactly `min_overlap` fails.
EditMetrics check_edit_limit(const std::string& original, const std::string& candidate,
                             double min_overlap = 0.6);

struct ContradictionVerdict {
    std::vector<bool> votes;
    int positive_count = 0;
    bool contradicts = false;  // strictly more than 80% of votes positive

    static ContradictionVerdict from_votes(std::vector<bool> votes);

    json to_json() const;
    static ContradictionVerdict from_json(const json& j);
};

/// Samples `votes` yes/no completions of the contradiction prompt with
/// News 1 = original, News 2 = candidate. Unparseable votes are resampled up
/// to a 2x draw budget; slots still unfilled count as "no contradiction".
ContradictionVerdict check_contradiction(const NewsItem& original, const std::string& candidate_text,
                                         Gateway& gateway, int votes = 10,
                                         const std::string& model_name = {});

}  // namespace advnews
