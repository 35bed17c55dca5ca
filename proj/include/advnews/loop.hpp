#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advnews/detector.hpp"
#include "advnews/filters.hpp"

namespace advnews {

/// Which adversary signal feeds the next generation round:
///   full            RAG detector scores for ranking + RAG rationale
///   rationale_only  retrieval-free detector for both rationale and ranking
///   rag_score_only  RAG detector scores for ranking, no rationale
///   plain_score     retrieval-free detector scores for ranking, no rationale
enum class FeedbackMode { full, rationale_only, rag_score_only, plain_score };

std::string feedback_mode_name(FeedbackMode mode);
FeedbackMode feedback_mode_from_name(const std::string& name);

bool mode_uses_rationale(FeedbackMode mode);
bool mode_uses_rag(FeedbackMode mode);

struct LoopConfig {
    int k_iterations = 6;
    int m_candidates = 8;
    int resample_cap = 3;  // total generate->filter batches attempted per round
    FeedbackMode feedback_mode = FeedbackMode::full;
    DetectorConfig adversary_detector;
    bool round0_direct = true;
    std::uint64_t rng_seed = 0;
    std::string generator_model;  // empty -> adversary detector's model
    double generator_temperature = 1.0;
    int contradiction_votes = 10;
    double min_overlap = 0.6;

    json to_json() const;
    static LoopConfig from_json(const json& j);
};

struct Candidate {
    std::string text;  // headline on the first line, description after
    int round = 0;
    int batch_index = 0;
    ContradictionVerdict verdict;
    EditMetrics edits;
    std::optional<DetectorResult> score;
    bool passed_filters = false;

    std::string headline() const;

    json to_json() const;
    static Candidate from_json(const json& j);
};

struct RoundRecord {
    int round = 0;
    std::vector<Candidate> candidates;  // every candidate generated this round
    int selected_index = -1;            // into candidates
    std::optional<Rationale> rationale_used;   // feedback that shaped this round's generation
    std::optional<ContextBlock> context_used;  // context shared by this round's scorings
    std::string generation_prompt_hash;

    const Candidate& selected() const { return candidates.at(static_cast<std::size_t>(selected_index)); }

    json to_json() const;
    static RoundRecord from_json(const json& j);
};

struct RewriteTrace {
    NewsItem seed;
    std::vector<RoundRecord> rounds;
    std::optional<Candidate> final;  // max-score selected candidate across rounds
    bool failed = false;
    std::string failure_reason;
    json config_echo;
    std::string model;
    std::string created_at;

    json to_json() const;
    static RewriteTrace from_json(const json& j);
};

/// Generates m candidate texts with the generator prompt (the feedback
/// variant once a previous rewrite exists; its rationale block is included
/// only when a rationale is supplied). Completions that do not parse into the
/// "Error introduced / Title / Description" layout are dropped and replaced
/// within a 3x batch budget.
std::vector<std::string> generate_candidates(const NewsItem& seed, const Candidate* prev,
                                             const Rationale* rationale, int m, Gateway& gateway,
                                             const std::string& model_name,
                                             double temperature = 1.0);

/// Applies the cheap edit-distance gate first and the LLM contradiction vote
/// only to candidates that survive it. Returns the passing candidates in
/// order; every input candidate is annotated in place.
std::vector<Candidate> filter_candidates(const NewsItem& seed, std::vector<Candidate>& candidates,
                                         Gateway& gateway, int votes, double min_overlap,
                                         const std::string& model_name);

/// Scores every passing candidate against the shared round context (never
/// per-candidate retrieval) and selects the argmax of the normalized score;
/// ties break toward the lowest batch_index.
std::pair<std::size_t, std::vector<Candidate>> rank_and_select(std::vector<Candidate> candidates,
                                                               const DetectorConfig& detector,
                                                               Gateway& gateway,
                                                               const ContextBlock* context);

/// The full iterative rewrite for one seed: optional direct round 0, then
/// k rounds of generate -> filter -> rank/select with per-mode feedback.
/// Retrieval happens at most once per round, for the selected candidate.
RewriteTrace run_rewrite(const NewsItem& seed, const LoopConfig& cfg, Gateway& gateway,
                         Retriever* retriever);

/// Persistence hooks for resumable batch runs.
class RunStore {
public:
    explicit RunStore(std::filesystem::path run_dir);

    bool is_completed(const std::string& seed_id) const;
    RewriteTrace load_trace(const std::string& seed_id) const;
    void store_trace(const RewriteTrace& trace);

    const std::filesystem::path& dir() const { return run_dir_; }
    std::filesystem::path trace_path(const std::string& seed_id) const;

private:
    void flush_manifest() const;

    std::filesystem::path run_dir_;
    mutable std::mutex mutex_;
    std::vector<std::string> completed_;
    std::vector<std::pair<std::string, std::string>> failed_;
};

struct BatchOutcome {
    std::vector<RewriteTrace> traces;        // seed order
    std::vector<LabeledNews> dataset;        // seed (label 1) + final fake (label 0) pairs
    std::vector<LabeledNews> round_dataset;  // per-round selected fakes, round field set
    std::size_t failed_seeds = 0;
};

/// Seeds are independent and processed concurrently up to parallel_seeds;
/// outputs are assembled in seed order so runs are byte-stable regardless of
/// parallelism. A seed that exhausts its resample budget is logged and
/// excluded without aborting the batch.
BatchOutcome run_batch(std::span<const NewsItem> seeds, const LoopConfig& cfg, Gateway& gateway,
                       Retriever* retriever, int parallel_seeds, RunStore* store = nullptr);

}  // namespace advnews
