#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "cascadex/dataset.hpp"

namespace cascadex::synthetic {

/// Binary task where most instances come from two well separated Gaussians
/// and a planted fraction sits in a separate region (marked by feature 1)
/// whose class-conditional distributions overlap heavily.
struct HardSubpopulationSpec {
    std::size_t size = 1000;
    double hard_fraction = 0.2;
    /// Extra pure-noise features appended after the two informative ones.
    std::size_t noise_features = 2;
    double easy_separation = 1.5;
    double hard_separation = 0.3;
    std::uint64_t seed = 0;
    std::string id_prefix = "x";
};

Dataset hard_subpopulation(const HardSubpopulationSpec& spec);

/// Binary task with a curved boundary x0 + amplitude * sin(frequency * x1) = 0
/// over the square [-2, 2]^2, plus label noise. A linear model recovers the
/// trend, a hidden layer is needed for the wiggle, so model size buys accuracy.
struct CurvedBoundarySpec {
    std::size_t size = 1000;
    double amplitude = 1.0;
    double frequency = 2.0;
    double label_noise = 0.05;
    std::size_t noise_features = 0;
    std::uint64_t seed = 0;
    std::string id_prefix = "x";
};

Dataset curved_boundary(const CurvedBoundarySpec& spec);

}  // namespace cascadex::synthetic
