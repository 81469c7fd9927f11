#include "cascadex/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cascadex/error.hpp"
#include "cascadex/metrics.hpp"
#include "cascadex/parallel.hpp"

namespace cascadex {

using ojson = nlohmann::ordered_json;

std::int64_t GainScenario::total() const {
    return std::accumulate(new_exits.begin(), new_exits.end(), std::int64_t{0}) + new_model_exits;
}

void GainScenario::validate() const {
    const std::size_t n = layer_counts.size();
    if (n < 2) {
        throw ValidationError("scenario needs at least two original models");
    }
    if (accuracies.size() != n || new_exits.size() != n) {
        throw ValidationError("scenario: layer_counts, accuracies and new_exits must have equal length");
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (layer_counts[k] < 1) {
            throw ValidationError("scenario: layer counts must be positive");
        }
        if (k > 0 && layer_counts[k] <= layer_counts[k - 1]) {
            throw ValidationError("scenario: layer counts must be strictly ascending");
        }
        if (!(accuracies[k] >= 0.0 && accuracies[k] <= 1.0)) {
            throw ValidationError("scenario: accuracies must lie in [0, 1]");
        }
        if (new_exits[k] < 0) {
            throw ValidationError("scenario: exit counts must be non-negative");
        }
    }
    if (insert_after + 1 >= n) {
        throw ValidationError("scenario: insert_after must leave a larger model after the insertion point");
    }
    if (!(layer_counts[insert_after] < new_layers && new_layers < layer_counts[insert_after + 1])) {
        throw ValidationError("scenario: new_layers must lie strictly between its neighbours' layer counts");
    }
    if (!(new_accuracy >= 0.0 && new_accuracy <= 1.0)) {
        throw ValidationError("scenario: new_accuracy must lie in [0, 1]");
    }
    if (new_model_exits < 0) {
        throw ValidationError("scenario: exit counts must be non-negative");
    }
    if (total() <= 0) {
        throw ValidationError("scenario: no instances");
    }
}

OriginalExits solve_original_exits(const GainScenario& scenario) {
    scenario.validate();
    const std::size_t i = scenario.insert_after;
    const double ratio = static_cast<double>(scenario.new_layers) / scenario.layer_counts[i + 1];
    const double moved = ratio * static_cast<double>(scenario.new_exits[i + 1] + scenario.new_model_exits);

    OriginalExits out;
    out.counts.assign(scenario.new_exits.begin(), scenario.new_exits.end());
    out.counts[i] = static_cast<double>(scenario.new_exits[i] + scenario.new_model_exits) - moved;
    out.counts[i + 1] = static_cast<double>(scenario.new_exits[i + 1]) + moved;
    out.feasible = std::all_of(out.counts.begin(), out.counts.end(), [](double s) { return s >= 0.0; });
    return out;
}

double predict_gain(const GainScenario& scenario) {
    scenario.validate();
    const std::size_t i = scenario.insert_after;
    const double n = static_cast<double>(scenario.total());
    const double a_lo = scenario.accuracies[i];
    const double a_hi = scenario.accuracies[i + 1];
    const double s_new = static_cast<double>(scenario.new_model_exits);
    const double s_next = static_cast<double>(scenario.new_exits[i + 1]);
    const double ratio = static_cast<double>(scenario.new_layers) / scenario.layer_counts[i + 1];
    return (s_new * (scenario.new_accuracy - a_lo) - ratio * (s_next + s_new) * (a_hi - a_lo)) / n;
}

namespace {

void require_bracketed_accuracy(const GainScenario& scenario) {
    const std::size_t i = scenario.insert_after;
    if (!(scenario.accuracies[i] <= scenario.new_accuracy && scenario.new_accuracy <= scenario.accuracies[i + 1])) {
        throw ValidationError("bound requires a_i <= a* <= a_{i+1}");
    }
}

}  // namespace

double gain_upper_bound(const GainScenario& scenario) {
    scenario.validate();
    require_bracketed_accuracy(scenario);
    const std::size_t i = scenario.insert_after;
    const double n = static_cast<double>(scenario.total());
    const double s_new = static_cast<double>(scenario.new_model_exits);
    const double s_next = static_cast<double>(scenario.new_exits[i + 1]);
    const double ratio = static_cast<double>(scenario.layer_counts[i]) / scenario.layer_counts[i + 1];
    return (scenario.accuracies[i + 1] - scenario.accuracies[i]) * (s_new - ratio * (s_next + s_new)) / n;
}

double max_gain_bound(std::span<const int> layer_counts, std::span<const double> accuracies,
                      std::span<const double> original_exits, std::size_t insert_after) {
    const std::size_t n = layer_counts.size();
    if (n < 2 || accuracies.size() != n || original_exits.size() != n || insert_after + 1 >= n) {
        throw ValidationError("max_gain_bound: inconsistent cascade description");
    }
    double best_step = -std::numeric_limits<double>::infinity();
    double min_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < n; ++k) {
        best_step = std::max(best_step, accuracies[k + 1] - accuracies[k]);
        min_ratio = std::min(min_ratio, static_cast<double>(layer_counts[k]) / layer_counts[k + 1]);
    }
    const double total = std::accumulate(original_exits.begin(), original_exits.end(), 0.0);
    if (!(total > 0.0)) {
        throw ValidationError("max_gain_bound: no instances");
    }
    const double share = (original_exits[insert_after] + original_exits[insert_after + 1]) / total;
    return share * best_step * (1.0 - min_ratio);
}

double max_gain_bound(const GainScenario& scenario) {
    const OriginalExits original = solve_original_exits(scenario);
    return max_gain_bound(scenario.layer_counts, scenario.accuracies, original.counts, scenario.insert_after);
}

GainReport analyze_scenario(const GainScenario& scenario) {
    GainReport report;
    report.predicted_gain = predict_gain(scenario);
    report.original_exits = solve_original_exits(scenario);
    const std::size_t i = scenario.insert_after;
    if (scenario.accuracies[i] <= scenario.new_accuracy && scenario.new_accuracy <= scenario.accuracies[i + 1]) {
        report.gain_upper_bound = gain_upper_bound(scenario);
        report.max_gain_bound = max_gain_bound(scenario);
    }
    return report;
}

GainScenario scenario_from_json(std::string_view text) {
    try {
        const ojson j = ojson::parse(text);
        GainScenario s;
        s.layer_counts = j.at("layer_counts").get<std::vector<int>>();
        s.accuracies = j.at("accuracies").get<std::vector<double>>();
        s.insert_after = j.at("insert_after").get<std::size_t>();
        s.new_layers = j.at("new_layers").get<int>();
        s.new_accuracy = j.at("new_accuracy").get<double>();
        s.new_exits = j.at("new_exits").get<std::vector<std::int64_t>>();
        s.new_model_exits = j.at("new_model_exits").get<std::int64_t>();
        s.validate();
        return s;
    } catch (const ojson::exception& e) {
        throw SchemaError(std::string("malformed scenario: ") + e.what());
    }
}

GainScenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open scenario '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return scenario_from_json(buffer.str());
}

std::string scenario_to_json(const GainScenario& s) {
    ojson j;
    j["layer_counts"] = s.layer_counts;
    j["accuracies"] = s.accuracies;
    j["insert_after"] = s.insert_after;
    j["new_layers"] = s.new_layers;
    j["new_accuracy"] = s.new_accuracy;
    j["new_exits"] = s.new_exits;
    j["new_model_exits"] = s.new_model_exits;
    return j.dump(1) + "\n";
}

std::string gain_report_to_json(const GainReport& report) {
    ojson j;
    j["predicted_gain"] = report.predicted_gain;
    j["original_exits"] = report.original_exits.counts;
    j["feasible"] = report.original_exits.feasible;
    j["bounds_applicable"] = report.gain_upper_bound.has_value();
    j["gain_upper_bound"] = report.gain_upper_bound ? ojson(*report.gain_upper_bound) : ojson(nullptr);
    j["max_gain_bound"] = report.max_gain_bound ? ojson(*report.max_gain_bound) : ojson(nullptr);
    return j.dump(1) + "\n";
}

namespace {

double cascade_accuracy(std::span<const ExitTrace> traces, const Dataset& dataset) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        hits += traces[i].predicted_class() == dataset[i].label;
    }
    return static_cast<double>(hits) / static_cast<double>(traces.size());
}

}  // namespace

double empirical_gain(const Cascade& original, const Cascade& extended, const Dataset& dataset,
                      double speedup_tolerance, unsigned threads) {
    if (dataset.empty()) {
        throw ValidationError("empirical_gain: empty dataset");
    }
    const auto base = run_cascade(original, dataset, threads);
    const auto grown = run_cascade(extended, dataset, threads);
    const double base_speedup = speedup_ratio(base, original.full_model_cost());
    const double grown_speedup = speedup_ratio(grown, extended.full_model_cost());
    if (std::abs(grown_speedup - base_speedup) > speedup_tolerance * base_speedup) {
        std::ostringstream msg;
        msg << "empirical_gain: speed-ups differ (" << base_speedup << "x vs " << grown_speedup << "x)";
        throw ValidationError(msg.str());
    }
    return cascade_accuracy(grown, dataset) - cascade_accuracy(base, dataset);
}

GainScenario measured_scenario(const Cascade& extended, std::size_t inserted_stage, const Dataset& dataset,
                               unsigned threads) {
    if (inserted_stage == 0 || inserted_stage + 1 >= extended.size()) {
        throw ValidationError("measured_scenario: the inserted stage must have neighbours on both sides");
    }
    if (dataset.empty()) {
        throw ValidationError("measured_scenario: empty dataset");
    }
    const auto traces = run_cascade(extended, dataset, threads);
    std::vector<std::int64_t> exits(extended.size(), 0);
    for (const ExitTrace& t : traces) {
        ++exits[t.exit_stage];
    }

    const auto stages = extended.stages();
    std::vector<double> stage_accuracy(stages.size());
    parallel_for(stages.size(), threads, [&](std::size_t k) {
        std::size_t hits = 0;
        for (const Instance& inst : dataset.instances()) {
            hits += stages[k].model->predict(inst.features).predicted_class() == inst.label;
        }
        stage_accuracy[k] = static_cast<double>(hits) / static_cast<double>(dataset.size());
    });

    GainScenario s;
    for (std::size_t k = 0; k < stages.size(); ++k) {
        if (k == inserted_stage) {
            s.new_layers = stages[k].layer_cost;
            s.new_accuracy = stage_accuracy[k];
            s.new_model_exits = exits[k];
            continue;
        }
        s.layer_counts.push_back(stages[k].layer_cost);
        s.accuracies.push_back(stage_accuracy[k]);
        s.new_exits.push_back(exits[k]);
    }
    s.insert_after = inserted_stage - 1;
    s.validate();
    return s;
}

}  // namespace cascadex
