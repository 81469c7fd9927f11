#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cascadex {

/// One labeled example. `difficulty` is the binary d(x) once a difficulty
/// report has been merged in: 1 means the reference model got it wrong.
struct Instance {
    std::string id;
    std::vector<double> features;
    std::size_t label = 0;
    std::optional<int> difficulty;

    friend bool operator==(const Instance&, const Instance&) = default;
};

/// Validated, immutable collection of instances sharing one feature space.
class Dataset {
public:
    /// Throws SchemaError if any instance breaks the shared dimensions, has an
    /// out-of-range label, a non-binary difficulty, or a duplicate id.
    Dataset(std::vector<Instance> instances, std::size_t num_classes, std::size_t feature_dim);

    std::span<const Instance> instances() const noexcept { return instances_; }
    const Instance& operator[](std::size_t i) const { return instances_[i]; }
    std::size_t size() const noexcept { return instances_.size(); }
    bool empty() const noexcept { return instances_.empty(); }
    std::size_t num_classes() const noexcept { return num_classes_; }
    std::size_t feature_dim() const noexcept { return feature_dim_; }

    std::optional<std::size_t> index_of(std::string_view id) const;

    /// True when every instance carries a difficulty label.
    bool has_difficulty() const noexcept;

    /// New dataset with the given positions, in the given order.
    Dataset subset(std::span<const std::size_t> positions) const;

    /// Copy with difficulty labels replaced from `labels` (keyed by id).
    /// Ids missing from the map keep their current value.
    Dataset with_difficulty(const std::map<std::string, int>& labels) const;

private:
    std::vector<Instance> instances_;
    std::size_t num_classes_;
    std::size_t feature_dim_;
    std::unordered_map<std::string, std::size_t> index_;
};

enum class DatasetFormat { jsonl_features, jsonl_text };

DatasetFormat parse_dataset_format(std::string_view name);

struct LoadOptions {
    /// Bucket count for hashed text features.
    std::size_t text_dim = 64;
    /// Declared class count; inferred as max(label) + 1 when absent.
    std::optional<std::size_t> num_classes;
};

/// Reads one JSON record per line. Blank lines are skipped.
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                     const LoadOptions& options = {});
Dataset read_dataset(std::istream& in, DatasetFormat format, const LoadOptions& options = {});

/// Writes the jsonl_features form, including the difficulty field when set.
/// Doubles are written in shortest round-trip form, so a reload is bit-exact.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
void write_dataset(const Dataset& dataset, std::ostream& out);

/// 64-bit FNV-1a over the raw bytes of `token`.
std::uint64_t token_hash(std::string_view token);

/// Signed feature hashing: lowercase, split on whitespace, add +1 (hash bit 63
/// clear) or -1 (set) at bucket hash % dim, then L2-normalize. Empty or
/// fully-cancelled text gives the zero vector.
std::vector<double> hash_featurize(std::string_view text, std::size_t dim);

/// Stratified K-fold partition. fold_of is indexed by dataset position.
struct FoldAssignment {
    std::size_t num_folds = 0;
    std::vector<std::size_t> fold_of;

    std::vector<std::size_t> members(std::size_t fold) const;
    std::vector<std::size_t> complement(std::size_t fold) const;

    friend bool operator==(const FoldAssignment&, const FoldAssignment&) = default;
};

/// Deterministic in (dataset order, K, seed). Each class is shuffled with the
/// seed and dealt round-robin; the deal cursor carries over between classes so
/// fold sizes differ by at most one overall as well as per class.
FoldAssignment assign_folds(const Dataset& dataset, std::size_t num_folds, std::uint64_t seed);

}  // namespace cascadex
