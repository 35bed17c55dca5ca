#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advnews/detector.hpp"

namespace advnews {

/// Area under the ROC curve, Mann-Whitney form: over all (positive, negative)
/// pairs, 1 for pos > neg, 0.5 for ties, 0 otherwise. Computed with the
/// O(n log n) rank formulation; matches the pairwise definition exactly.
/// Throws DataError unless both classes are present.
double auc_roc(std::span<const ScoreRecord> rows);

/// Average precision over positives walked in (score desc, item_id asc)
/// order. Throws DataError when no positive is present.
double average_precision(std::span<const ScoreRecord> rows);

struct ThresholdMetrics {
    double f1_macro = 0.0;
    double accuracy = 0.0;
};

/// Predictions are score >= threshold; macro F1 is the unweighted mean of
/// per-class F1, with zero-support or zero-predicted classes contributing 0.
ThresholdMetrics threshold_metrics(std::span<const ScoreRecord> rows, double threshold = 0.5);

/// Uniformly subsamples the majority class down to the minority size,
/// preserving every minority row and the original row order. Deterministic
/// per rng_seed. Throws DataError on single-class input.
std::vector<ScoreRecord> balance_downsample(std::span<const ScoreRecord> rows,
                                            std::uint64_t rng_seed);

struct MetricReport {
    std::string grouping;  // e.g. "year=2023" or "round=3"
    std::string detector_name;
    std::string retriever_kind;
    std::optional<double> auc_roc;
    std::optional<double> average_precision;
    std::optional<double> f1_macro;
    std::optional<double> accuracy;
    std::string null_reason;  // set when the metrics could not be computed
    double threshold_used = 0.5;
    int n_pos = 0;
    int n_neg = 0;

    json to_json() const;
};

enum class TrendGroupBy { year, round };

/// One report per (group, detector_name, retriever_kind), groups ascending.
/// Balancing, when requested, is applied within each group. Groups failing
/// the AUC preconditions get null metrics and a reason instead of an error.
std::vector<MetricReport> trend_table(std::span<const ScoreRecord> rows, TrendGroupBy group_by,
                                      bool balance, std::uint64_t rng_seed);

struct HistogramRow {
    int label = 0;
    std::string detector_name;
    std::string retriever_kind;
    std::vector<long> counts;  // equal-width bins over [0, 1]

    json to_json() const;
};

/// Score histograms per (label, detector, retriever) for external plotting;
/// a score of exactly 1.0 lands in the last bin.
std::vector<HistogramRow> export_distributions(std::span<const ScoreRecord> rows, int bins = 20);

/// Renders histogram rows as an aligned-column text table.
std::string render_histogram_table(const std::vector<HistogramRow>& rows, int bins);

}  // namespace advnews
