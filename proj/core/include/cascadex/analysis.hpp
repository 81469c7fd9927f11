#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cascadex/cascade.hpp"
#include "cascadex/dataset.hpp"

namespace cascadex {

/// Inserting one model into an n-model cascade at equal speed-up.
///
/// Indices are 0-based: the new model sits between original models
/// `insert_after` and `insert_after + 1`, with
/// layer_counts[insert_after] < new_layers < layer_counts[insert_after + 1].
/// `new_exits[k]` counts instances leaving original model k in the extended
/// cascade and `new_model_exits` those leaving the inserted model.
struct GainScenario {
    std::vector<int> layer_counts;
    std::vector<double> accuracies;
    std::size_t insert_after = 0;
    int new_layers = 0;
    double new_accuracy = 0.0;
    std::vector<std::int64_t> new_exits;
    std::int64_t new_model_exits = 0;

    /// Sum of all exit counts.
    std::int64_t total() const;

    /// Throws ValidationError on shape, ordering, or range violations.
    void validate() const;
};

/// Exit counts of the original cascade that make its instance count and total
/// layer cost match the extended one, with every original threshold except the
/// two around the insertion point held fixed. Counts may be fractional; a
/// negative count marks the scenario infeasible but is still reported.
struct OriginalExits {
    std::vector<double> counts;
    bool feasible = true;
};

OriginalExits solve_original_exits(const GainScenario& scenario);

/// Expected accuracy change T = (1/N)[s*(a* - a_i) - (L*/L_{i+1})(s_{i+1} + s*)(a_{i+1} - a_i)],
/// assuming each model's accuracy is the same on every subset of instances.
double predict_gain(const GainScenario& scenario);

/// (1/N)(a_{i+1} - a_i)[s* - (L_i/L_{i+1})(s_{i+1} + s*)].
/// Requires a_i <= a* <= a_{i+1}; throws ValidationError otherwise.
double gain_upper_bound(const GainScenario& scenario);

/// ((s_i + s_{i+1})/N) * max_k(a_{k+1} - a_k) * (1 - min_k(L_k / L_{k+1})),
/// with s the original exit counts and N their sum.
double max_gain_bound(std::span<const int> layer_counts, std::span<const double> accuracies,
                      std::span<const double> original_exits, std::size_t insert_after);
double max_gain_bound(const GainScenario& scenario);

struct GainReport {
    double predicted_gain = 0.0;
    OriginalExits original_exits;
    /// Bounds are present only when a_i <= a* <= a_{i+1}.
    std::optional<double> gain_upper_bound;
    std::optional<double> max_gain_bound;
};

GainReport analyze_scenario(const GainScenario& scenario);

GainScenario scenario_from_json(std::string_view text);
GainScenario load_scenario(const std::filesystem::path& path);
std::string scenario_to_json(const GainScenario& scenario);
std::string gain_report_to_json(const GainReport& report);

/// Accuracy of the 3-stage cascade minus that of the 2-stage one on `dataset`.
/// Throws ValidationError unless their measured speed-ups agree within
/// `speedup_tolerance` (relative).
double empirical_gain(const Cascade& original, const Cascade& extended, const Dataset& dataset,
                      double speedup_tolerance = 0.01, unsigned threads = 1);

/// Builds the scenario the gain formula sees for a cascade that already holds
/// the inserted stage: exits come from running `extended` on `dataset`, and
/// each stage's accuracy is that model's standalone accuracy on all of it.
GainScenario measured_scenario(const Cascade& extended, std::size_t inserted_stage, const Dataset& dataset,
                               unsigned threads = 1);

}  // namespace cascadex
