#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cascadex/dataset.hpp"

namespace cascadex {

class Rng;

/// Normalized class probabilities emitted by a model.
struct ClassDistribution {
    std::vector<double> probs;

    /// Lowest index among the maximal entries.
    std::size_t predicted_class() const;
    double confidence() const;
};

/// Maximum class probability.
double confidence(const ClassDistribution& dist);

/// Numerically stable softmax.
ClassDistribution softmax(std::span<const double> logits);

enum class ArchitectureKind { linear, mlp };

/// `linear` is multinomial logistic regression; `mlp` adds one tanh hidden layer.
struct Architecture {
    ArchitectureKind kind = ArchitectureKind::linear;
    std::size_t hidden_size = 0;

    static Architecture linear() { return {}; }
    static Architecture mlp(std::size_t hidden) { return {ArchitectureKind::mlp, hidden}; }

    /// "linear" or "mlp:<hidden>".
    std::string to_string() const;
    static Architecture parse(std::string_view text);

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct TrainConfig {
    std::size_t epochs = 10;
    /// Unset selects 0.05 for linear models and 0.01 for mlp.
    std::optional<double> learning_rate;
    std::size_t batch_size = 32;
    /// Weight of the difficulty-aware pair loss; 0 disables it.
    double lambda = 0.0;
    /// Confidence margin for the pair loss.
    double epsilon = 0.3;
    std::uint64_t seed = 0;
    /// Maximum (difficult, easy) pairs per mini-batch.
    std::size_t pair_cap = 256;

    /// Throws ValidationError on out-of-range fields.
    void validate() const;
    double effective_learning_rate(const Architecture& arch) const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Trainable softmax classifier. Parameters live in one flat buffer:
///   linear: W[C x D], b[C]
///   mlp:    W1[H x D], b1[H], W2[C x H], b2[C]
class ClassifierModel {
public:
    /// All-zero parameters.
    ClassifierModel(Architecture arch, std::size_t feature_dim, std::size_t num_classes,
                    TrainConfig config = {});

    /// Glorot-uniform weights from `rng`, biases zero.
    static ClassifierModel initialized(Architecture arch, std::size_t feature_dim,
                                       std::size_t num_classes, const TrainConfig& config, Rng& rng);

    const Architecture& architecture() const noexcept { return arch_; }
    std::size_t feature_dim() const noexcept { return feature_dim_; }
    std::size_t num_classes() const noexcept { return num_classes_; }
    const TrainConfig& train_config() const noexcept { return config_; }

    std::size_t parameter_count() const noexcept { return params_.size(); }
    std::span<const double> parameters() const noexcept { return params_; }
    std::span<double> parameters() noexcept { return params_; }

    /// Throws ValidationError if x has the wrong dimension.
    std::vector<double> logits(std::span<const double> x) const;
    ClassDistribution predict(std::span<const double> x) const;

    /// grad += d(loss)/d(params) given d(loss)/d(logits) at input x.
    void accumulate_gradient(std::span<const double> x, std::span<const double> dlogits,
                             std::span<double> grad) const;

    friend bool operator==(const ClassifierModel&, const ClassifierModel&) = default;

private:
    void check_input(std::span<const double> x) const;

    Architecture arch_;
    std::size_t feature_dim_;
    std::size_t num_classes_;
    TrainConfig config_;
    std::vector<double> params_;
};

ClassDistribution predict(const ClassifierModel& model, const Instance& instance);

/// Hinge on the confidence gap: max(0, epsilon - (c_easy - c_difficult)).
/// Zero once the easy instance out-confides the difficult one by epsilon.
double dar_pair_loss(double c_difficult, double c_easy, double epsilon);

/// Positions within a batch.
struct DarPair {
    std::size_t difficult;
    std::size_t easy;

    friend bool operator==(const DarPair&, const DarPair&) = default;
};

/// All difficult x easy cross pairs of the batch, or a seeded sample of `cap`
/// of them (sorted) when there are more. Equal-difficulty pairs never appear.
/// Throws ValidationError if an instance lacks a difficulty label.
std::vector<DarPair> sample_dar_pairs(std::span<const Instance> batch, std::size_t cap, Rng& rng);

struct LossBreakdown {
    double cross_entropy = 0.0;
    /// Mean pair hinge over `pairs` (0 when there are none).
    double dar = 0.0;
    double total = 0.0;
    std::size_t pairs = 0;
    std::size_t active_pairs = 0;
};

/// Mean cross-entropy + lambda * mean pair hinge for an explicit pair set.
/// When `grad` is non-empty it is overwritten with the analytic gradient.
/// The confidence path differentiates through the max probability; ties pick
/// the lowest class index, and a hinge exactly at its kink contributes zero.
LossBreakdown compute_loss(const ClassifierModel& model, std::span<const Instance> batch,
                           const TrainConfig& config, std::span<const DarPair> pairs,
                           std::span<double> grad = {});

/// compute_loss with pairs drawn by sample_dar_pairs from a generator seeded by
/// config.seed. With lambda == 0 no pairs are drawn and no labels are needed.
double total_loss(const ClassifierModel& model, std::span<const Instance> batch,
                  const TrainConfig& config);

struct EpochStats {
    std::size_t epoch = 0;
    double loss = 0.0;
    double cross_entropy = 0.0;
    double dar = 0.0;
};

struct TrainResult {
    ClassifierModel model;
    std::vector<EpochStats> log;
};

/// Mini-batch gradient descent at a constant learning rate. Fully determined
/// by (dataset order, architecture, config); separate seed streams drive
/// initialization, shuffling and pair sampling, so a run with no difficult
/// instances matches the lambda == 0 run bit for bit.
TrainResult train_with_log(const Dataset& dataset, const Architecture& arch, const TrainConfig& config);
ClassifierModel train(const Dataset& dataset, const Architecture& arch, const TrainConfig& config);

struct GradientCheckReport {
    double max_relative_error = 0.0;
    std::size_t parameters_checked = 0;
    std::size_t pairs_checked = 0;
    /// Pairs within `kink_margin` of the hinge kink or of a max-probability tie.
    std::size_t pairs_excluded = 0;
};

/// Central differences (step 1e-5) against compute_loss's analytic gradient
/// over every parameter. Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradientCheckReport gradient_check(const ClassifierModel& model, std::span<const Instance> batch,
                                   const TrainConfig& config, double kink_margin = 1e-4);

std::string model_to_json(const ClassifierModel& model);
/// Throws SchemaError when tensor shapes disagree with the declared dims.
ClassifierModel model_from_json(std::string_view text);
void save_model(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_model(const std::filesystem::path& path);

}  // namespace cascadex
