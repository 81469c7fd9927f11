#include "cascadex/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cascadex/error.hpp"
#include "cascadex/rng.hpp"

namespace cascadex {

using json = nlohmann::json;

Dataset::Dataset(std::vector<Instance> instances, std::size_t num_classes, std::size_t feature_dim)
    : instances_(std::move(instances)), num_classes_(num_classes), feature_dim_(feature_dim) {
    if (num_classes_ == 0) {
        throw SchemaError("num_classes must be positive");
    }
    if (feature_dim_ == 0) {
        throw SchemaError("feature_dim must be positive");
    }
    index_.reserve(instances_.size());
    for (std::size_t i = 0; i < instances_.size(); ++i) {
        const Instance& inst = instances_[i];
        if (inst.features.size() != feature_dim_) {
            throw SchemaError("instance '" + inst.id + "' has " + std::to_string(inst.features.size()) +
                              " features, expected " + std::to_string(feature_dim_));
        }
        if (inst.label >= num_classes_) {
            throw SchemaError("instance '" + inst.id + "' has label " + std::to_string(inst.label) +
                              " outside [0, " + std::to_string(num_classes_) + ")");
        }
        if (inst.difficulty && *inst.difficulty != 0 && *inst.difficulty != 1) {
            throw SchemaError("instance '" + inst.id + "' has non-binary difficulty");
        }
        if (!index_.emplace(inst.id, i).second) {
            throw SchemaError("duplicate instance id '" + inst.id + "'");
        }
    }
}

std::optional<std::size_t> Dataset::index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

bool Dataset::has_difficulty() const noexcept {
    return std::all_of(instances_.begin(), instances_.end(),
                       [](const Instance& inst) { return inst.difficulty.has_value(); });
}

Dataset Dataset::subset(std::span<const std::size_t> positions) const {
    std::vector<Instance> picked;
    picked.reserve(positions.size());
    for (std::size_t p : positions) {
        picked.push_back(instances_.at(p));
    }
    return Dataset(std::move(picked), num_classes_, feature_dim_);
}

Dataset Dataset::with_difficulty(const std::map<std::string, int>& labels) const {
    std::vector<Instance> copy = instances_;
    for (Instance& inst : copy) {
        if (auto it = labels.find(inst.id); it != labels.end()) {
            inst.difficulty = it->second;
        }
    }
    return Dataset(std::move(copy), num_classes_, feature_dim_);
}

DatasetFormat parse_dataset_format(std::string_view name) {
    if (name == "jsonl_features") {
        return DatasetFormat::jsonl_features;
    }
    if (name == "jsonl_text") {
        return DatasetFormat::jsonl_text;
    }
    throw ValidationError("unknown dataset format '" + std::string(name) + "'");
}

std::uint64_t token_hash(std::string_view token) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : token) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<double> hash_featurize(std::string_view text, std::size_t dim) {
    if (dim == 0) {
        throw ValidationError("hash_featurize: dim must be positive");
    }
    std::vector<double> out(dim, 0.0);
    std::string lowered(text);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

    std::istringstream tokens(lowered);
    std::string token;
    while (tokens >> token) {
        const std::uint64_t h = token_hash(token);
        const double sign = (h >> 63) == 0 ? 1.0 : -1.0;
        out[h % dim] += sign;
    }

    double norm = 0.0;
    for (double v : out) {
        norm += v * v;
    }
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& v : out) {
            v /= norm;
        }
    }
    return out;
}

namespace {

struct RawRecord {
    Instance instance;
    std::size_t line;
};

Instance parse_record(const json& rec, DatasetFormat format, const LoadOptions& options,
                      std::size_t line) {
    if (!rec.is_object()) {
        throw ParseError(line, "record is not a JSON object");
    }
    Instance inst;
    auto id = rec.find("id");
    if (id == rec.end() || !id->is_string()) {
        throw ParseError(line, "missing string field 'id'");
    }
    inst.id = id->get<std::string>();

    auto label = rec.find("label");
    if (label == rec.end() || !label->is_number_integer()) {
        throw ParseError(line, "missing integer field 'label'");
    }
    if (label->get<long long>() < 0) {
        throw SchemaError("instance '" + inst.id + "' has negative label");
    }
    inst.label = label->get<std::size_t>();

    if (format == DatasetFormat::jsonl_features) {
        auto features = rec.find("features");
        if (features == rec.end() || !features->is_array()) {
            throw ParseError(line, "missing array field 'features'");
        }
        inst.features.reserve(features->size());
        for (const json& v : *features) {
            if (!v.is_number()) {
                throw ParseError(line, "non-numeric feature value");
            }
            inst.features.push_back(v.get<double>());
        }
    } else {
        auto text = rec.find("text");
        if (text == rec.end() || !text->is_string()) {
            throw ParseError(line, "missing string field 'text'");
        }
        inst.features = hash_featurize(text->get<std::string>(), options.text_dim);
    }

    if (auto d = rec.find("difficulty"); d != rec.end() && !d->is_null()) {
        if (!d->is_number_integer()) {
            throw ParseError(line, "field 'difficulty' must be 0 or 1");
        }
        inst.difficulty = d->get<int>();
    }
    return inst;
}

}  // namespace

Dataset read_dataset(std::istream& in, DatasetFormat format, const LoadOptions& options) {
    std::vector<RawRecord> records;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) {
            continue;
        }
        json rec;
        try {
            rec = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ParseError(line, std::string("malformed JSON: ") + e.what());
        }
        records.push_back({parse_record(rec, format, options, line), line});
    }
    if (records.empty()) {
        throw ValidationError("empty dataset");
    }

    const std::size_t dim = records.front().instance.features.size();
    std::size_t max_label = 0;
    for (const RawRecord& r : records) {
        if (r.instance.features.size() != dim) {
            throw SchemaError("line " + std::to_string(r.line) + ": instance '" + r.instance.id +
                              "' has " + std::to_string(r.instance.features.size()) +
                              " features, expected " + std::to_string(dim));
        }
        max_label = std::max(max_label, r.instance.label);
    }
    const std::size_t num_classes = options.num_classes.value_or(max_label + 1);

    std::vector<Instance> instances;
    instances.reserve(records.size());
    for (RawRecord& r : records) {
        instances.push_back(std::move(r.instance));
    }
    return Dataset(std::move(instances), num_classes, dim);
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                     const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open dataset '" + path.string() + "'");
    }
    return read_dataset(in, format, options);
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
    for (const Instance& inst : dataset.instances()) {
        json rec = json::object();
        rec["id"] = inst.id;
        rec["label"] = inst.label;
        rec["features"] = inst.features;
        if (inst.difficulty) {
            rec["difficulty"] = *inst.difficulty;
        }
        out << rec.dump() << '\n';
    }
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ValidationError("cannot write dataset '" + path.string() + "'");
    }
    write_dataset(dataset, out);
}

std::vector<std::size_t> FoldAssignment::members(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] == fold) {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<std::size_t> FoldAssignment::complement(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] != fold) {
            out.push_back(i);
        }
    }
    return out;
}

FoldAssignment assign_folds(const Dataset& dataset, std::size_t num_folds, std::uint64_t seed) {
    if (num_folds < 2) {
        throw ValidationError("assign_folds: K must be at least 2");
    }
    if (num_folds > dataset.size()) {
        throw ValidationError("assign_folds: K=" + std::to_string(num_folds) +
                              " exceeds dataset size " + std::to_string(dataset.size()));
    }

    std::vector<std::vector<std::size_t>> by_class(dataset.num_classes());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        by_class[dataset[i].label].push_back(i);
    }

    Rng rng(seed);
    FoldAssignment folds;
    folds.num_folds = num_folds;
    folds.fold_of.assign(dataset.size(), 0);
    std::size_t cursor = 0;
    for (auto& members : by_class) {
        rng.shuffle(std::span<std::size_t>(members));
        for (std::size_t pos : members) {
            folds.fold_of[pos] = cursor;
            cursor = (cursor + 1) % num_folds;
        }
    }
    return folds;
}

}  // namespace cascadex
