#include "cascadex/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cascadex/error.hpp"

namespace cascadex {

using ojson = nlohmann::ordered_json;

double dis(std::span<const ScoredInstance> scored) {
    std::vector<std::pair<double, int>> items;
    items.reserve(scored.size());
    std::size_t easy = 0, difficult = 0;
    for (const ScoredInstance& s : scored) {
        if (!s.difficulty) {
            throw ValidationError("dis: every instance needs a difficulty label");
        }
        items.emplace_back(s.confidence, *s.difficulty);
        (*s.difficulty == 1 ? difficult : easy) += 1;
    }
    if (easy == 0 || difficult == 0) {
        throw ValidationError("dis: undefined without both easy and difficult instances");
    }

    std::sort(items.begin(), items.end());
    // Walk groups of equal confidence; a difficult instance inverts against
    // every easy instance in strictly lower groups.
    double inversions = 0.0;
    std::size_t easy_below = 0;
    for (std::size_t i = 0; i < items.size();) {
        std::size_t j = i;
        std::size_t group_easy = 0, group_difficult = 0;
        while (j < items.size() && items[j].first == items[i].first) {
            (items[j].second == 1 ? group_difficult : group_easy) += 1;
            ++j;
        }
        inversions += static_cast<double>(group_difficult) * static_cast<double>(easy_below);
        easy_below += group_easy;
        i = j;
    }
    return 1.0 - inversions / (static_cast<double>(easy) * static_cast<double>(difficult));
}

namespace {

std::size_t bin_of(double confidence, std::size_t num_bins) {
    const double scaled = confidence * static_cast<double>(num_bins);
    auto bin = static_cast<std::size_t>(std::max(0.0, std::ceil(scaled) - 1.0));
    bin = std::min(bin, num_bins - 1);
    // Compare against the decimal edge itself so 0.3 with 10 bins lands in
    // (0.2, 0.3] even though 0.3 * 10 rounds above 3.
    if (bin > 0 && confidence <= static_cast<double>(bin) / static_cast<double>(num_bins)) {
        --bin;
    }
    if (bin + 1 < num_bins && confidence > static_cast<double>(bin + 1) / static_cast<double>(num_bins)) {
        ++bin;
    }
    return bin;
}

}  // namespace

double ece(std::span<const ScoredInstance> scored, std::size_t num_bins) {
    if (scored.empty()) {
        throw ValidationError("ece: empty input");
    }
    if (num_bins == 0) {
        throw ValidationError("ece: num_bins must be positive");
    }
    std::vector<double> conf_sum(num_bins, 0.0), correct(num_bins, 0.0);
    std::vector<std::size_t> count(num_bins, 0);
    for (const ScoredInstance& s : scored) {
        if (!(s.confidence >= 0.0 && s.confidence <= 1.0)) {
            throw ValidationError("ece: confidence outside [0, 1]");
        }
        const std::size_t b = bin_of(s.confidence, num_bins);
        conf_sum[b] += s.confidence;
        correct[b] += s.correct() ? 1.0 : 0.0;
        ++count[b];
    }
    const double n = static_cast<double>(scored.size());
    double total = 0.0;
    for (std::size_t b = 0; b < num_bins; ++b) {
        if (count[b] == 0) {
            continue;
        }
        const double size = static_cast<double>(count[b]);
        total += (size / n) * std::abs(correct[b] / size - conf_sum[b] / size);
    }
    return total;
}

double accuracy(std::span<const ScoredInstance> scored) {
    if (scored.empty()) {
        throw ValidationError("accuracy: empty input");
    }
    const auto hits = std::count_if(scored.begin(), scored.end(), [](const ScoredInstance& s) { return s.correct(); });
    return static_cast<double>(hits) / static_cast<double>(scored.size());
}

double f1_binary(std::span<const ScoredInstance> scored, std::size_t positive_class) {
    if (scored.empty()) {
        throw ValidationError("f1_binary: empty input");
    }
    double tp = 0, fp = 0, fn = 0;
    for (const ScoredInstance& s : scored) {
        const bool predicted = s.predicted_label == positive_class;
        const bool actual = s.gold_label == positive_class;
        tp += predicted && actual;
        fp += predicted && !actual;
        fn += !predicted && actual;
    }
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    if (precision + recall == 0.0) {
        return 0.0;
    }
    return 2.0 * precision * recall / (precision + recall);
}

MetricsReport evaluate(std::span<const ExitTrace> traces, const Dataset& dataset, int full_model_cost,
                       const EvaluateOptions& options, const std::map<std::string, int>* difficulty) {
    if (traces.size() != dataset.size()) {
        throw ValidationError("evaluate: " + std::to_string(traces.size()) + " traces for " +
                              std::to_string(dataset.size()) + " instances");
    }
    if (options.num_stages == 0) {
        throw ValidationError("evaluate: num_stages must be positive");
    }

    MetricsReport report;
    report.instances = traces.size();
    report.exit_histogram.assign(options.num_stages, 0);

    std::vector<char> seen(dataset.size(), 0);
    std::vector<ScoredInstance> scored;
    scored.reserve(traces.size());
    bool difficulty_complete = difficulty != nullptr;
    for (const ExitTrace& t : traces) {
        const auto pos = dataset.index_of(t.instance_id);
        if (!pos) {
            throw ValidationError("evaluate: trace id '" + t.instance_id + "' is not in the dataset");
        }
        if (seen[*pos]) {
            throw ValidationError("evaluate: duplicate trace for '" + t.instance_id + "'");
        }
        seen[*pos] = 1;
        if (t.exit_stage >= options.num_stages) {
            throw ValidationError("evaluate: trace '" + t.instance_id + "' exits past the last stage");
        }
        ++report.exit_histogram[t.exit_stage];

        ScoredInstance s;
        s.confidence = t.confidence;
        s.predicted_label = t.predicted_class();
        s.gold_label = dataset[*pos].label;
        if (difficulty) {
            if (auto it = difficulty->find(t.instance_id); it != difficulty->end()) {
                s.difficulty = it->second;
            } else {
                difficulty_complete = false;
            }
        }
        scored.push_back(s);
    }

    report.accuracy = accuracy(scored);
    report.ece = ece(scored, options.ece_bins);
    report.speedup = speedup_ratio(traces, full_model_cost);
    std::int64_t total_cost = 0;
    for (const ExitTrace& t : traces) {
        total_cost += t.total_cost;
    }
    report.mean_cost = static_cast<double>(total_cost) / static_cast<double>(traces.size());
    if (options.f1_positive_class) {
        report.f1 = f1_binary(scored, *options.f1_positive_class);
    }
    if (difficulty_complete) {
        const bool has_easy = std::any_of(scored.begin(), scored.end(), [](auto& s) { return *s.difficulty == 0; });
        const bool has_hard = std::any_of(scored.begin(), scored.end(), [](auto& s) { return *s.difficulty == 1; });
        if (has_easy && has_hard) {
            report.dis = dis(scored);
        }
    }
    return report;
}

std::string metrics_report_to_json(const MetricsReport& report) {
    ojson j;
    j["instances"] = report.instances;
    j["accuracy"] = report.accuracy;
    j["f1"] = report.f1 ? ojson(*report.f1) : ojson(nullptr);
    j["dis"] = report.dis ? ojson(*report.dis) : ojson(nullptr);
    j["ece"] = report.ece;
    j["speedup"] = report.speedup;
    j["mean_cost"] = report.mean_cost;
    j["exit_histogram"] = report.exit_histogram;
    return j.dump(1) + "\n";
}

void save_metrics_report(const MetricsReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ValidationError("cannot write metrics '" + path.string() + "'");
    }
    out << metrics_report_to_json(report);
}

namespace {

std::string csv_number(double v) {
    // nlohmann's serializer gives the shortest round-trip form.
    return ojson(v).dump();
}

}  // namespace

void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& out) {
    out << "tau,speedup,accuracy,dis,ece\n";
    for (const SweepRow& row : rows) {
        out << csv_number(row.tau) << ',' << csv_number(row.speedup) << ',' << csv_number(row.accuracy) << ','
            << (row.dis ? csv_number(*row.dis) : std::string()) << ',' << csv_number(row.ece) << '\n';
    }
}

}  // namespace cascadex
