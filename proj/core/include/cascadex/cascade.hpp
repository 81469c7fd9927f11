#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cascadex/classifier.hpp"
#include "cascadex/dataset.hpp"

namespace cascadex {

/// A complete classifier and the number of layers one forward pass costs.
struct StageSpec {
    std::shared_ptr<const ClassifierModel> model;
    int layer_cost = 1;
};

/// Stages ordered by ascending layer cost plus one exit threshold per
/// non-final stage. `full_model_cost` is the reference layer count that
/// speed-up ratios are measured against.
class Cascade {
public:
    /// Throws ValidationError on unsorted stages, a threshold count other than
    /// stages - 1, thresholds outside [0, 1], or non-positive costs.
    Cascade(std::vector<StageSpec> stages, std::vector<double> thresholds, int full_model_cost);

    /// One tau shared by every non-final stage.
    static Cascade shared(std::vector<StageSpec> stages, double tau, int full_model_cost);

    std::span<const StageSpec> stages() const noexcept { return stages_; }
    std::span<const double> thresholds() const noexcept { return thresholds_; }
    int full_model_cost() const noexcept { return full_model_cost_; }
    std::size_t size() const noexcept { return stages_.size(); }

    Cascade with_thresholds(std::vector<double> thresholds) const;

private:
    std::vector<StageSpec> stages_;
    std::vector<double> thresholds_;
    int full_model_cost_;
};

/// What one instance cost on its way through the cascade.
struct ExitTrace {
    std::string instance_id;
    std::size_t exit_stage = 0;
    ClassDistribution distribution;
    double confidence = 0.0;
    std::vector<int> executed_costs;
    std::int64_t total_cost = 0;

    std::size_t predicted_class() const { return distribution.predicted_class(); }
};

/// Runs stages in order and exits at the first stage whose confidence is
/// strictly greater than its threshold. The last stage always emits.
ExitTrace cascade_predict(const Cascade& cascade, const Instance& instance);

/// Traces in dataset order regardless of `threads`.
std::vector<ExitTrace> run_cascade(const Cascade& cascade, const Dataset& dataset, unsigned threads = 1);

/// full_model_cost / mean(total_cost). Every executed stage counts, including
/// the repeated passes of instances that fall through to larger stages.
double speedup_ratio(std::span<const ExitTrace> traces, int full_model_cost);

struct ThresholdCalibration {
    std::vector<double> thresholds;
    double measured_speedup = 0.0;
    /// Range spanned by the candidate sweep.
    double min_speedup = 0.0;
    double max_speedup = 0.0;
};

/// Picks one shared tau for all non-final stages. Candidates are 0, 1 and
/// every distinct non-final-stage confidence on `calibration`; the candidate
/// whose speed-up is closest to `target` wins (larger tau on ties). Throws
/// ValidationError if the best candidate misses by more than
/// tolerance * target, reporting the achievable range.
ThresholdCalibration calibrate_threshold(const Cascade& cascade, const Dataset& calibration,
                                         double target, double tolerance = 0.04);

/// Same sweep over the threshold of one stage, other thresholds held at their
/// current values.
ThresholdCalibration calibrate_stage_threshold(const Cascade& cascade, std::size_t stage,
                                               const Dataset& calibration, double target,
                                               double tolerance = 0.04);

/// On-disk cascade description. Model paths are resolved relative to the
/// directory holding the description file.
struct CascadeDescription {
    struct Stage {
        std::filesystem::path model_path;
        int layer_cost = 1;
    };
    std::vector<Stage> stages;
    std::vector<double> thresholds;
    int full_model_cost = 12;
};

CascadeDescription load_cascade_description(const std::filesystem::path& path);
void save_cascade_description(const CascadeDescription& description, const std::filesystem::path& path);
/// Loads every stage model. Relative model paths are taken from `base_dir`.
Cascade instantiate(const CascadeDescription& description, const std::filesystem::path& base_dir);

/// One JSON object per line: id, exit_stage, probs, confidence,
/// executed_costs, total_cost.
void write_traces(std::span<const ExitTrace> traces, std::ostream& out);
std::vector<ExitTrace> read_traces(std::istream& in);
void save_traces(std::span<const ExitTrace> traces, const std::filesystem::path& path);
std::vector<ExitTrace> load_traces(const std::filesystem::path& path);

}  // namespace cascadex
