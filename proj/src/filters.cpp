#include "advnews/filters.hpp"

#include <algorithm>
#include <cctype>

namespace advnews {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i == start) continue;
        std::size_t b = start, e = i;
        while (b < e && std::ispunct(static_cast<unsigned char>(text[b]))) ++b;
        while (e > b && std::ispunct(static_cast<unsigned char>(text[e - 1]))) --e;
        if (b == e) continue;
        tokens.push_back(to_lower(text.substr(b, e - b)));
    }
    return tokens;
}

int levenshtein_tokens(std::span<const std::string> a, std::span<const std::string> b) {
    if (a.size() < b.size()) std::swap(a, b);  // keep the DP row on the shorter side
    const std::size_t n = b.size();
    std::vector<int> row(n + 1);
    for (std::size_t j = 0; j <= n; ++j) row[j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        int diag = row[0];
        row[0] = static_cast<int>(i);
        for (std::size_t j = 1; j <= n; ++j) {
            int up = row[j];
            int subst = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
            row[j] = std::min({subst, row[j - 1] + 1, up + 1});
            diag = up;
        }
    }
    return row[n];
}

json EditMetrics::to_json() const {
    return json{{"token_distance", token_distance},
                {"overlap_ratio", overlap_ratio},
                {"within_limit", within_limit}};
}

EditMetrics EditMetrics::from_json(const json& j) {
    EditMetrics m;
    m.token_distance = j.at("token_distance").get<int>();
    m.overlap_ratio = j.at("overlap_ratio").get<double>();
    m.within_limit = j.at("within_limit").get<bool>();
    return m;
}

EditMetrics check_edit_limit(const std::string& original, const std::string& candidate,
                             double min_overlap) {
    auto a = tokenize(original);
    auto b = tokenize(candidate);
    EditMetrics m;
    m.token_distance = levenshtein_tokens(a, b);
    const double denom = static_cast<double>(std::max({a.size(), b.size(), std::size_t{1}}));
    m.overlap_ratio = 1.0 - static_cast<double>(m.token_distance) / denom;
    m.within_limit = m.overlap_ratio > min_overlap;
    return m;
}

ContradictionVerdict ContradictionVerdict::from_votes(std::vector<bool> votes) {
    ContradictionVerdict v;
    v.votes = std::move(votes);
    v.positive_count = static_cast<int>(std::count(v.votes.begin(), v.votes.end(), true));
    // "more than eight of ten" generalized to a strict >80% ratio
    v.contradicts = 10 * v.positive_count > 8 * static_cast<int>(v.votes.size());
    return v;
}

json ContradictionVerdict::to_json() const {
    return json{{"votes", votes}, {"positive_count", positive_count}, {"contradicts", contradicts}};
}

ContradictionVerdict ContradictionVerdict::from_json(const json& j) {
    ContradictionVerdict v;
    v.votes = j.at("votes").get<std::vector<bool>>();
    v.positive_count = j.at("positive_count").get<int>();
    v.contradicts = j.at("contradicts").get<bool>();
    return v;
}

ContradictionVerdict check_contradiction(const NewsItem& original, const std::string& candidate_text,
                                         Gateway& gateway, int votes,
                                         const std::string& model_name) {
    if (votes < 1) throw ConfigError("contradiction vote count must be >= 1");
    ChatRequest request;
    request.template_id = TemplateId::contradiction;
    request.bindings = {{"news", original.full_text()}, {"fake_news", candidate_text}};
    request.temperature = 1.0;
    request.max_output = 8;
    request.model_name = model_name;

    std::vector<bool> parsed;
    parsed.reserve(static_cast<std::size_t>(votes));
    const int budget = 2 * votes;
    int drawn = 0;
    while (static_cast<int>(parsed.size()) < votes && drawn < budget) {
        int take = std::min(votes - static_cast<int>(parsed.size()), budget - drawn);
        request.n_samples = take;
        ChatResponse response = gateway.complete(request);
        for (const auto& text : response.texts) {
            try {
                parsed.push_back(parse_binary(text));
            } catch (const ParseFailure&) {
                // dropped; replacement drawn on the next pass if budget remains
            }
        }
        drawn += take;
    }
    while (static_cast<int>(parsed.size()) < votes) parsed.push_back(false);
    return ContradictionVerdict::from_votes(std::move(parsed));
}

}  // namespace advnews
