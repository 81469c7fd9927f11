#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cascadex/classifier.hpp"
#include "cascadex/dataset.hpp"

namespace cascadex {

/// Binary difficulty per instance from cross-fitted models.
///
/// Entries are in dataset order. `labels[i]` is 0 exactly when every seed's
/// held-out model classified instance i correctly.
struct DifficultyReport {
    std::vector<std::string> ids;
    std::vector<int> labels;
    std::vector<std::vector<bool>> per_seed_correct;
    std::size_t num_folds = 0;
    std::vector<std::uint64_t> seeds;
    FoldAssignment folds;

    std::map<std::string, int> label_map() const;

    friend bool operator==(const DifficultyReport&, const DifficultyReport&) = default;
};

struct DifficultyOptions {
    std::size_t num_folds = 8;
    std::size_t num_seeds = 5;
    /// Seed for the fold partition, held fixed across all training seeds.
    std::uint64_t fold_seed = 0;
    unsigned threads = 1;
};

/// For seed s in base_config.seed .. base_config.seed + num_seeds - 1 and each
/// fold f, trains on every other fold and predicts fold f. Seeds change the
/// initialization and batch order only. base_config.lambda must be 0.
DifficultyReport label_difficulty(const Dataset& dataset, const Architecture& arch,
                                  const TrainConfig& base_config, const DifficultyOptions& options = {});

std::string difficulty_report_to_json(const DifficultyReport& report);
DifficultyReport difficulty_report_from_json(std::string_view text);
void save_difficulty_report(const DifficultyReport& report, const std::filesystem::path& path);
DifficultyReport load_difficulty_report(const std::filesystem::path& path);

}  // namespace cascadex
