#include "cascadex/synthetic.hpp"

#include <cmath>
#include <vector>

#include "cascadex/rng.hpp"

namespace cascadex::synthetic {

namespace {

std::string make_id(const std::string& prefix, std::size_t i) { return prefix + std::to_string(i); }

}  // namespace

Dataset hard_subpopulation(const HardSubpopulationSpec& spec) {
    Rng rng(spec.seed);
    const std::size_t dim = 2 + spec.noise_features;
    std::vector<Instance> out;
    out.reserve(spec.size);
    for (std::size_t i = 0; i < spec.size; ++i) {
        Instance inst;
        inst.id = make_id(spec.id_prefix, i);
        inst.label = rng.below(2);
        const double sign = inst.label == 1 ? 1.0 : -1.0;
        const bool hard = rng.uniform() < spec.hard_fraction;
        inst.features.resize(dim);
        if (hard) {
            inst.features[0] = rng.normal(sign * spec.hard_separation, 1.5);
            inst.features[1] = rng.normal(3.0, 0.5);
        } else {
            inst.features[0] = rng.normal(sign * spec.easy_separation, 1.0);
            inst.features[1] = rng.normal(0.0, 0.5);
        }
        for (std::size_t j = 2; j < dim; ++j) {
            inst.features[j] = rng.normal();
        }
        out.push_back(std::move(inst));
    }
    return Dataset(std::move(out), 2, dim);
}

Dataset curved_boundary(const CurvedBoundarySpec& spec) {
    Rng rng(spec.seed);
    const std::size_t dim = 2 + spec.noise_features;
    std::vector<Instance> out;
    out.reserve(spec.size);
    for (std::size_t i = 0; i < spec.size; ++i) {
        Instance inst;
        inst.id = make_id(spec.id_prefix, i);
        inst.features.resize(dim);
        const double x0 = rng.uniform(-2.0, 2.0);
        const double x1 = rng.uniform(-2.0, 2.0);
        inst.features[0] = x0;
        inst.features[1] = x1;
        for (std::size_t j = 2; j < dim; ++j) {
            inst.features[j] = rng.normal();
        }
        std::size_t label = x0 + spec.amplitude * std::sin(spec.frequency * x1) > 0.0 ? 1 : 0;
        if (rng.uniform() < spec.label_noise) {
            label = 1 - label;
        }
        inst.label = label;
        out.push_back(std::move(inst));
    }
    return Dataset(std::move(out), 2, dim);
}

}  // namespace cascadex::synthetic
