#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advnews/retrieval.hpp"

namespace advnews {

enum class Aggregation { average, majority };

std::string aggregation_name(Aggregation a);
Aggregation aggregation_from_name(const std::string& name);

struct DetectorConfig {
    std::string name;  // label used in score records; defaults to model_name
    ModelProfile model;
    RetrieverConfig retriever;
    int n_score_samples = 10;
    double temperature = 1.0;
    Aggregation aggregation = Aggregation::average;
    bool use_cot = false;
    int vote_threshold_raw = 6;

    const std::string& display_name() const {
        return name.empty() ? model.model_name : name;
    }

    json to_json() const;
    static DetectorConfig from_json(const json& j);
};

struct Rationale {
    std::vector<std::string> points;  // 1..3 bullets, text preserved verbatim
    std::optional<ContextBlock> grounded_in;

    std::string joined() const;  // "- point" lines for prompt insertion

    json to_json() const;
    static Rationale from_json(const json& j);
};

struct DetectorResult {
    std::vector<int> raw_samples;  // each in [1, 10]
    double normalized = 0.0;       // the aggregate in [0, 1]
    std::optional<ContextBlock> context;
    std::optional<Rationale> rationale;
    std::string config_echo;  // compact summary sufficient to recompute the aggregate

    json to_json() const;
    static DetectorResult from_json(const json& j);
};

/// Linear map of a raw 1-10 score onto [0, 1]: (s - 1) / 9.
double normalize_score(int s);

/// average: mean of normalized samples; majority: fraction of samples with
/// raw score >= vote_threshold_raw.
double aggregate_samples(std::span<const int> raw_samples, Aggregation aggregation,
                         int vote_threshold_raw);

struct DetectorInput {
    std::string item_id;
    std::string headline;  // retrieval query
    std::string text;      // full text bound to <news/>
    std::optional<NewsItem> seed_exclude;

    static DetectorInput from_item(const NewsItem& item);
};

/// Scores an item: retrieves context when configured (or uses the caller's
/// `preset_context`), renders the plain/RAG prompt (CoT-wrapped on request),
/// draws n_score_samples with up to 3x oversampling for unparseable outputs,
/// and aggregates. The result carries everything needed to recompute the
/// aggregate from raw_samples.
DetectorResult score_plausibility(const DetectorInput& input, const DetectorConfig& cfg,
                                  Gateway& gateway, Retriever* retriever,
                                  const ContextBlock* preset_context = nullptr);

/// Separate rationale call; uses the RAG rationale prompt when context is
/// available and the retrieval-free variant otherwise. Keeps at most the
/// first three bullets, verbatim.
Rationale generate_rationale(const DetectorInput& input, const DetectorConfig& cfg,
                             Gateway& gateway, Retriever* retriever,
                             const ContextBlock* preset_context = nullptr);

struct BatchEntry {
    std::optional<DetectorResult> result;
    std::string error;  // set when this item failed
};

/// Order-preserving batch scoring; per-item failures become error entries
/// without aborting the batch.
std::vector<BatchEntry> score_batch(std::span<const DetectorInput> items, const DetectorConfig& cfg,
                                    Gateway& gateway, Retriever* retriever, int parallelism);

/// Persisted score record: the metrics module's input contract plus the raw
/// samples and aggregation parameters needed to recompute `score`.
struct ScoreRecord {
    std::string item_id;
    int label = -1;  // -1 when unknown
    double score = 0.0;
    std::string detector_name;
    std::string retriever_kind;
    std::optional<int> round;
    std::optional<int> year;
    std::vector<int> raw_samples;
    std::string aggregation;
    int vote_threshold_raw = 6;

    json to_json() const;
    static ScoreRecord from_json(const json& j);
};

void write_score_records(const std::vector<ScoreRecord>& records,
                         const std::filesystem::path& path);
std::vector<ScoreRecord> read_score_records(const std::filesystem::path& path);

}  // namespace advnews
