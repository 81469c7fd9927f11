#include "cascadex/difficulty.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cascadex/error.hpp"
#include "cascadex/parallel.hpp"

namespace cascadex {

using ojson = nlohmann::ordered_json;

std::map<std::string, int> DifficultyReport::label_map() const {
    std::map<std::string, int> out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out.emplace(ids[i], labels[i]);
    }
    return out;
}

DifficultyReport label_difficulty(const Dataset& dataset, const Architecture& arch,
                                  const TrainConfig& base_config, const DifficultyOptions& options) {
    base_config.validate();
    if (base_config.lambda != 0.0) {
        throw ValidationError("difficulty models must be trained with lambda = 0");
    }
    if (options.num_seeds < 1) {
        throw ValidationError("num_seeds must be at least 1");
    }

    DifficultyReport report;
    report.num_folds = options.num_folds;
    report.folds = assign_folds(dataset, options.num_folds, options.fold_seed);
    for (std::size_t s = 0; s < options.num_seeds; ++s) {
        report.seeds.push_back(base_config.seed + s);
    }

    const std::size_t n = dataset.size();
    const std::size_t k = options.num_folds;
    // correct[seed][position], filled by independent (seed, fold) jobs.
    std::vector<std::vector<char>> correct(options.num_seeds, std::vector<char>(n, 0));

    parallel_for(options.num_seeds * k, options.threads, [&](std::size_t job) {
        const std::size_t s = job / k;
        const std::size_t fold = job % k;
        const std::vector<std::size_t> held_out = report.folds.members(fold);
        const std::vector<std::size_t> train_positions = report.folds.complement(fold);

        TrainConfig config = base_config;
        config.seed = report.seeds[s];
        const ClassifierModel model = train(dataset.subset(train_positions), arch, config);
        for (std::size_t pos : held_out) {
            const ClassDistribution dist = model.predict(dataset[pos].features);
            correct[s][pos] = dist.predicted_class() == dataset[pos].label ? 1 : 0;
        }
    });

    report.ids.reserve(n);
    report.labels.reserve(n);
    report.per_seed_correct.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<bool> per_seed(options.num_seeds);
        bool all_correct = true;
        for (std::size_t s = 0; s < options.num_seeds; ++s) {
            per_seed[s] = correct[s][i] != 0;
            all_correct = all_correct && per_seed[s];
        }
        report.ids.push_back(dataset[i].id);
        report.labels.push_back(all_correct ? 0 : 1);
        report.per_seed_correct.push_back(std::move(per_seed));
    }
    return report;
}

std::string difficulty_report_to_json(const DifficultyReport& report) {
    ojson j;
    j["num_folds"] = report.num_folds;
    j["seeds"] = report.seeds;
    ojson labels = ojson::object();
    ojson per_seed = ojson::object();
    ojson folds = ojson::object();
    for (std::size_t i = 0; i < report.ids.size(); ++i) {
        labels[report.ids[i]] = report.labels[i];
        per_seed[report.ids[i]] = report.per_seed_correct[i];
        folds[report.ids[i]] = report.folds.fold_of.at(i);
    }
    j["labels"] = std::move(labels);
    j["per_seed_correct"] = std::move(per_seed);
    j["fold_of"] = std::move(folds);
    return j.dump(1) + "\n";
}

DifficultyReport difficulty_report_from_json(std::string_view text) {
    try {
        const ojson j = ojson::parse(text);
        DifficultyReport report;
        report.num_folds = j.at("num_folds").get<std::size_t>();
        report.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        report.folds.num_folds = report.num_folds;
        const ojson& per_seed = j.at("per_seed_correct");
        const ojson& folds = j.at("fold_of");
        for (const auto& [id, label] : j.at("labels").items()) {
            const int d = label.get<int>();
            if (d != 0 && d != 1) {
                throw SchemaError("difficulty for '" + id + "' is not 0 or 1");
            }
            report.ids.push_back(id);
            report.labels.push_back(d);
            report.per_seed_correct.push_back(per_seed.at(id).get<std::vector<bool>>());
            report.folds.fold_of.push_back(folds.at(id).get<std::size_t>());
        }
        return report;
    } catch (const ojson::exception& e) {
        throw SchemaError(std::string("malformed difficulty report: ") + e.what());
    }
}

void save_difficulty_report(const DifficultyReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ValidationError("cannot write difficulty report '" + path.string() + "'");
    }
    out << difficulty_report_to_json(report);
}

DifficultyReport load_difficulty_report(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open difficulty report '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return difficulty_report_from_json(buffer.str());
}

}  // namespace cascadex
