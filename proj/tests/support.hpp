#pragma once

// Hand-built models and datasets shared by the unit and acceptance tests.

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "cascadex/analysis.hpp"
#include "cascadex/cascade.hpp"
#include "cascadex/classifier.hpp"
#include "cascadex/dataset.hpp"
#include "cascadex/rng.hpp"

namespace support {

/// Binary linear model whose class-1 logit is feature `k`, so
/// p(class 1) = sigmoid(x[k]).
inline std::shared_ptr<const cascadex::ClassifierModel> feature_reader(std::size_t k, std::size_t dim) {
    auto model = std::make_shared<cascadex::ClassifierModel>(cascadex::Architecture::linear(), dim, 2);
    model->parameters()[dim + k] = 1.0;
    return model;
}

/// The feature value that makes a feature_reader report class-1 probability p.
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// A cascade of feature readers: stage k reads feature k.
inline cascadex::Cascade reader_cascade(const std::vector<int>& costs, double tau, int full_cost) {
    std::vector<cascadex::StageSpec> stages;
    for (std::size_t k = 0; k < costs.size(); ++k) {
        stages.push_back({feature_reader(k, costs.size()), costs[k]});
    }
    return cascadex::Cascade::shared(std::move(stages), tau, full_cost);
}

/// Instances whose class-1 probability at stage k is probs[i][k].
inline cascadex::Dataset reader_dataset(const std::vector<std::vector<double>>& probs,
                                        const std::vector<std::size_t>& labels) {
    std::vector<cascadex::Instance> items;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        std::vector<double> x;
        for (double p : probs[i]) {
            x.push_back(logit(p));
        }
        items.push_back({"r" + std::to_string(i), std::move(x), labels[i], std::nullopt});
    }
    return cascadex::Dataset(std::move(items), 2, probs.front().size());
}

/// A random well-formed insertion scenario with 2 to 5 original models and
/// non-decreasing accuracies. `bracketed` keeps a* within [a_i, a_{i+1}].
inline cascadex::GainScenario random_gain_scenario(cascadex::Rng& rng, bool bracketed) {
    cascadex::GainScenario s;
    const std::size_t n = 2 + rng.below(4);
    int layers = 1 + static_cast<int>(rng.below(3));
    double acc = rng.uniform(0.4, 0.7);
    for (std::size_t k = 0; k < n; ++k) {
        s.layer_counts.push_back(layers);
        layers += 2 + static_cast<int>(rng.below(6));
        s.accuracies.push_back(acc);
        acc += rng.uniform(0.0, 0.08);
        s.new_exits.push_back(static_cast<std::int64_t>(rng.below(200)));
    }
    s.insert_after = rng.below(n - 1);
    const std::size_t i = s.insert_after;
    const auto gap = static_cast<std::uint64_t>(s.layer_counts[i + 1] - s.layer_counts[i] - 1);
    s.new_layers = s.layer_counts[i] + 1 + static_cast<int>(rng.below(gap));
    s.new_accuracy = bracketed ? rng.uniform(s.accuracies[i], s.accuracies[i + 1]) : rng.uniform(0.3, 1.0);
    s.new_model_exits = 1 + static_cast<std::int64_t>(rng.below(200));
    return s;
}

}  // namespace support
