#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cascadex/cascade.hpp"
#include "cascadex/dataset.hpp"

namespace cascadex {

/// One prediction reduced to what the metrics need.
struct ScoredInstance {
    double confidence = 0.0;
    std::optional<int> difficulty;
    std::size_t predicted_label = 0;
    std::size_t gold_label = 0;

    bool correct() const noexcept { return predicted_label == gold_label; }
};

/// Difficulty inversion score: 1 - inversions / (#easy * #difficult), where an
/// inversion is a (difficult, easy) pair with the difficult instance strictly
/// more confident. Equal confidences are not inversions, and only the
/// ordering of confidences matters. O(N log N).
///
/// Throws ValidationError when an instance lacks a difficulty label or when
/// either class of difficulty is empty.
double dis(std::span<const ScoredInstance> scored);

/// Expected calibration error over `num_bins` equal-width bins. Bin k covers
/// ((k-1)/K, k/K]; a confidence of exactly 0 falls in the first bin. Empty
/// bins contribute nothing.
double ece(std::span<const ScoredInstance> scored, std::size_t num_bins = 10);

double accuracy(std::span<const ScoredInstance> scored);

/// F1 for one positive class; 0 when precision + recall is 0.
double f1_binary(std::span<const ScoredInstance> scored, std::size_t positive_class);

struct MetricsReport {
    std::size_t instances = 0;
    double accuracy = 0.0;
    std::optional<double> f1;
    std::optional<double> dis;
    double ece = 0.0;
    double speedup = 0.0;
    double mean_cost = 0.0;
    std::vector<std::size_t> exit_histogram;
};

struct EvaluateOptions {
    std::size_t num_stages = 0;
    std::size_t ece_bins = 10;
    /// When set, the report includes binary F1 for this class.
    std::optional<std::size_t> f1_positive_class;
};

/// Pairs every dataset instance with its trace by id and computes the report.
/// DIS uses `difficulty` (keyed by id) and is omitted when the map is absent
/// or holds only one difficulty class. Throws ValidationError when traces and
/// dataset ids do not match one-to-one.
MetricsReport evaluate(std::span<const ExitTrace> traces, const Dataset& dataset, int full_model_cost,
                       const EvaluateOptions& options,
                       const std::map<std::string, int>* difficulty = nullptr);

std::string metrics_report_to_json(const MetricsReport& report);
void save_metrics_report(const MetricsReport& report, const std::filesystem::path& path);

/// One operating point of a threshold sweep.
struct SweepRow {
    double tau = 0.0;
    double speedup = 0.0;
    double accuracy = 0.0;
    std::optional<double> dis;
    double ece = 0.0;
};

/// Header `tau,speedup,accuracy,dis,ece`; a missing DIS is an empty field.
void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& out);

}  // namespace cascadex
