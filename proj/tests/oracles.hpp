#pragma once

// Reference computations kept apart from the library's code paths.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "cascadex/analysis.hpp"
#include "cascadex/classifier.hpp"
#include "cascadex/metrics.hpp"

namespace oracle {

/// softmax in long double, straight from the definition.
inline std::vector<double> softmax(std::span<const double> logits) {
    long double sum = 0.0L;
    for (double z : logits) {
        sum += std::exp(static_cast<long double>(z));
    }
    std::vector<double> out;
    for (double z : logits) {
        out.push_back(static_cast<double>(std::exp(static_cast<long double>(z)) / sum));
    }
    return out;
}

/// Logits of a linear model read off its documented parameter layout.
inline std::vector<double> linear_logits(const cascadex::ClassifierModel& model, std::span<const double> x) {
    const auto p = model.parameters();
    const std::size_t d = model.feature_dim(), c = model.num_classes();
    std::vector<double> z(c);
    for (std::size_t k = 0; k < c; ++k) {
        long double acc = p[c * d + k];
        for (std::size_t j = 0; j < d; ++j) {
            acc += static_cast<long double>(p[k * d + j]) * x[j];
        }
        z[k] = static_cast<double>(acc);
    }
    return z;
}

/// O(N^2) difficulty inversion count over every (difficult, easy) pair.
inline double dis_brute_force(std::span<const cascadex::ScoredInstance> scored) {
    double inversions = 0.0, easy = 0.0, difficult = 0.0;
    for (const auto& a : scored) {
        (*a.difficulty == 1 ? difficult : easy) += 1.0;
        for (const auto& b : scored) {
            if (*a.difficulty == 1 && *b.difficulty == 0 && a.confidence > b.confidence) {
                inversions += 1.0;
            }
        }
    }
    return 1.0 - inversions / (easy * difficult);
}

/// Expected accuracy of the extended cascade minus the original one, each
/// computed directly as sum(a_k * exits_k) / N.
inline double direct_gain(const cascadex::GainScenario& s, const cascadex::OriginalExits& original) {
    double extended = s.new_accuracy * static_cast<double>(s.new_model_exits);
    double base = 0.0;
    for (std::size_t k = 0; k < s.layer_counts.size(); ++k) {
        extended += s.accuracies[k] * static_cast<double>(s.new_exits[k]);
        base += s.accuracies[k] * original.counts[k];
    }
    return (extended - base) / static_cast<double>(s.total());
}

/// Residuals of the two constraints the original exits must satisfy around
/// the insertion point: equal instance count, and equal cumulative layer cost
/// with every unchanged model's exits held fixed.
struct ConstraintResidual {
    double count = 0.0;
    double cost = 0.0;
};

inline ConstraintResidual constraint_residual(const cascadex::GainScenario& s,
                                              const cascadex::OriginalExits& original) {
    const std::size_t i = s.insert_after;
    double cumulative_i = 0.0;
    for (std::size_t k = 0; k <= i; ++k) {
        cumulative_i += s.layer_counts[k];
    }
    const double cumulative_next = cumulative_i + s.layer_counts[i + 1];
    const double ls = s.new_layers;
    const double si = static_cast<double>(s.new_exits[i]);
    const double snext = static_cast<double>(s.new_exits[i + 1]);
    const double sstar = static_cast<double>(s.new_model_exits);

    ConstraintResidual r;
    double total = 0.0;
    for (double c : original.counts) {
        total += c;
    }
    r.count = total - static_cast<double>(s.total());
    const double original_cost = original.counts[i] * cumulative_i + original.counts[i + 1] * cumulative_next;
    const double extended_cost = si * cumulative_i + sstar * (cumulative_i + ls) + snext * (cumulative_next + ls);
    r.cost = original_cost - extended_cost;
    return r;
}

}  // namespace oracle
