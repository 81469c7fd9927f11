#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cascadex/classifier.hpp"
#include "cascadex/dataset.hpp"

namespace cascadex {

/// One experiment, read from a JSON config file. Relative paths are resolved
/// against the directory that holds the config.
///
/// {
///   "train_data": "train.jsonl", "calibration_data": "calib.jsonl", "eval_data": "eval.jsonl",
///   "format": "jsonl_features", "text_dim": 64, "num_classes": 2,
///   "stages": [{"architecture": "linear", "layer_cost": 2},
///              {"architecture": "mlp:32", "layer_cost": 12}],
///   "full_model_cost": 12,
///   "train": {"epochs": 10, "learning_rate": 0.05, "batch_size": 32, "lambda": 0.5,
///             "epsilon": 0.3, "seed": 7, "pair_cap": 256},
///   "difficulty": {"folds": 8, "seeds": 5, "fold_seed": 0, "architecture": "linear",
///                  "report": "out/difficulty.json"},
///   "target_speedups": [2, 3], "tolerance": 0.04,
///   "sweep_taus": [0.5, 0.6, 0.7],
///   "f1_positive_class": 1,
///   "output_dir": "out",
///   "threads": 1
/// }
struct PipelineConfig {
    struct Stage {
        Architecture architecture;
        int layer_cost = 1;
    };

    std::filesystem::path train_data;
    std::filesystem::path calibration_data;
    std::filesystem::path eval_data;
    DatasetFormat format = DatasetFormat::jsonl_features;
    LoadOptions load;

    std::vector<Stage> stages;
    int full_model_cost = 12;
    TrainConfig train;

    std::size_t folds = 8;
    std::size_t num_seeds = 5;
    std::uint64_t fold_seed = 0;
    /// Defaults to the smallest stage's architecture.
    std::optional<Architecture> difficulty_architecture;
    /// Explicit difficulty report for DAR training. Without it, training falls
    /// back to <output_dir>/difficulty.json, then to labels in the dataset.
    std::optional<std::filesystem::path> difficulty_report;

    std::vector<double> target_speedups;
    double tolerance = 0.04;
    /// Empty selects 51 evenly spaced values over [0, 1].
    std::vector<double> sweep_taus;
    std::optional<std::size_t> f1_positive_class;

    std::filesystem::path output_dir = "out";
    unsigned threads = 1;

    void validate() const;
    Architecture labeling_architecture() const;
    std::vector<double> effective_sweep_taus() const;
};

PipelineConfig parse_pipeline_config(std::string_view json_text, const std::filesystem::path& base_dir);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Paths of the artifacts each command writes under output_dir.
struct OutputLayout {
    std::filesystem::path root;

    std::filesystem::path model(std::size_t stage) const;
    std::filesystem::path train_log() const { return root / "train_log.jsonl"; }
    std::filesystem::path cascade() const { return root / "cascade.json"; }
    std::filesystem::path difficulty() const { return root / "difficulty.json"; }
    std::filesystem::path labeled_train() const { return root / "train_labeled.jsonl"; }
    std::filesystem::path run_dir(double target) const;
    std::filesystem::path sweep() const { return root / "sweep.csv"; }
};

/// Trains every stage; writes models/stage_<k>.json, train_log.jsonl and an
/// uncalibrated cascade.json (all thresholds 1).
void cmd_train(const PipelineConfig& config, std::ostream& log);

/// Cross-fitted difficulty labels for the training set; writes
/// difficulty.json and train_labeled.jsonl.
void cmd_label(const PipelineConfig& config, std::ostream& log);

/// For each target speed-up: calibrates tau on the calibration set, runs the
/// eval set, and writes run_<t>x/{cascade.json,traces.jsonl,metrics.json}.
void cmd_run(const PipelineConfig& config, std::ostream& log);

/// Evaluates the eval set at every sweep tau; writes sweep.csv.
void cmd_sweep(const PipelineConfig& config, std::ostream& log);

/// Recomputes a metrics report from a trace file against the eval set.
void cmd_metrics(const PipelineConfig& config, const std::filesystem::path& traces,
                 const std::filesystem::path& out, std::ostream& log);

/// Gain analysis of a scenario file. Prints a summary to `log` and writes the
/// JSON report to `out` when given.
void cmd_analyze(const std::filesystem::path& scenario, const std::optional<std::filesystem::path>& out,
                 std::ostream& log);

}  // namespace cascadex
