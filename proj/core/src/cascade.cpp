#include "cascadex/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cascadex/error.hpp"
#include "cascadex/parallel.hpp"

namespace cascadex {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

Cascade::Cascade(std::vector<StageSpec> stages, std::vector<double> thresholds, int full_model_cost)
    : stages_(std::move(stages)), thresholds_(std::move(thresholds)), full_model_cost_(full_model_cost) {
    if (stages_.empty()) {
        throw ValidationError("a cascade needs at least one stage");
    }
    if (thresholds_.size() != stages_.size() - 1) {
        throw ValidationError("a cascade of " + std::to_string(stages_.size()) + " stages needs " +
                              std::to_string(stages_.size() - 1) + " thresholds, got " +
                              std::to_string(thresholds_.size()));
    }
    if (full_model_cost_ < 1) {
        throw ValidationError("full_model_cost must be positive");
    }
    for (std::size_t i = 0; i < stages_.size(); ++i) {
        if (!stages_[i].model) {
            throw ValidationError("stage " + std::to_string(i) + " has no model");
        }
        if (stages_[i].layer_cost < 1) {
            throw ValidationError("stage " + std::to_string(i) + " has non-positive layer_cost");
        }
        if (i > 0 && stages_[i].layer_cost < stages_[i - 1].layer_cost) {
            throw ValidationError("stages must be sorted by ascending layer_cost");
        }
        if (i > 0 && (stages_[i].model->feature_dim() != stages_[0].model->feature_dim() ||
                      stages_[i].model->num_classes() != stages_[0].model->num_classes())) {
            throw ValidationError("stage " + std::to_string(i) + " disagrees with stage 0 on dimensions");
        }
    }
    for (double tau : thresholds_) {
        if (!(tau >= 0.0 && tau <= 1.0)) {
            throw ValidationError("thresholds must lie in [0, 1]");
        }
    }
}

Cascade Cascade::shared(std::vector<StageSpec> stages, double tau, int full_model_cost) {
    const std::size_t n = stages.size();
    return Cascade(std::move(stages), std::vector<double>(n == 0 ? 0 : n - 1, tau), full_model_cost);
}

Cascade Cascade::with_thresholds(std::vector<double> thresholds) const {
    return Cascade(stages_, std::move(thresholds), full_model_cost_);
}

ExitTrace cascade_predict(const Cascade& cascade, const Instance& instance) {
    ExitTrace trace;
    trace.instance_id = instance.id;
    const auto stages = cascade.stages();
    const auto thresholds = cascade.thresholds();
    for (std::size_t k = 0; k < stages.size(); ++k) {
        trace.distribution = stages[k].model->predict(instance.features);
        trace.confidence = trace.distribution.confidence();
        trace.executed_costs.push_back(stages[k].layer_cost);
        trace.total_cost += stages[k].layer_cost;
        trace.exit_stage = k;
        if (k + 1 < stages.size() && trace.confidence > thresholds[k]) {
            break;
        }
    }
    return trace;
}

std::vector<ExitTrace> run_cascade(const Cascade& cascade, const Dataset& dataset, unsigned threads) {
    std::vector<ExitTrace> traces(dataset.size());
    parallel_for(dataset.size(), threads,
                 [&](std::size_t i) { traces[i] = cascade_predict(cascade, dataset[i]); });
    return traces;
}

double speedup_ratio(std::span<const ExitTrace> traces, int full_model_cost) {
    if (traces.empty()) {
        throw ValidationError("speedup_ratio: no traces");
    }
    std::int64_t total = 0;
    for (const ExitTrace& t : traces) {
        total += t.total_cost;
    }
    const double mean = static_cast<double>(total) / static_cast<double>(traces.size());
    return static_cast<double>(full_model_cost) / mean;
}

namespace {

/// Non-final stage confidences for every calibration instance, computed once.
struct ConfidenceTable {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    double at(std::size_t i, std::size_t k) const { return values[i * cols + k]; }
};

ConfidenceTable tabulate(const Cascade& cascade, const Dataset& data) {
    ConfidenceTable table;
    table.rows = data.size();
    table.cols = cascade.size() - 1;
    table.values.resize(table.rows * table.cols);
    const auto stages = cascade.stages();
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t k = 0; k < table.cols; ++k) {
            table.values[i * table.cols + k] = stages[k].model->predict(data[i].features).confidence();
        }
    }
    return table;
}

double mean_cost(const Cascade& cascade, const ConfidenceTable& table, std::span<const double> thresholds) {
    const auto stages = cascade.stages();
    std::int64_t total = 0;
    for (std::size_t i = 0; i < table.rows; ++i) {
        std::int64_t cost = 0;
        for (std::size_t k = 0; k < stages.size(); ++k) {
            cost += stages[k].layer_cost;
            if (k < table.cols && table.at(i, k) > thresholds[k]) {
                break;
            }
        }
        total += cost;
    }
    return static_cast<double>(total) / static_cast<double>(table.rows);
}

std::string format_speedup(double v) {
    std::ostringstream out;
    out.precision(4);
    out << v << "x";
    return out.str();
}

template <typename MakeThresholds>
ThresholdCalibration sweep(const Cascade& cascade, const ConfidenceTable& table,
                           std::vector<double> candidates, double target, double tolerance,
                           MakeThresholds&& make_thresholds) {
    candidates.push_back(0.0);
    candidates.push_back(1.0);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    ThresholdCalibration best;
    best.min_speedup = std::numeric_limits<double>::infinity();
    best.max_speedup = 0.0;
    double best_gap = std::numeric_limits<double>::infinity();
    for (double tau : candidates) {
        std::vector<double> thresholds = make_thresholds(tau);
        const double speedup = cascade.full_model_cost() / mean_cost(cascade, table, thresholds);
        best.min_speedup = std::min(best.min_speedup, speedup);
        best.max_speedup = std::max(best.max_speedup, speedup);
        const double gap = std::abs(speedup - target);
        if (gap <= best_gap) {  // ascending sweep: ties keep the larger tau
            best_gap = gap;
            best.thresholds = std::move(thresholds);
            best.measured_speedup = speedup;
        }
    }
    if (best_gap > tolerance * target) {
        throw ValidationError("target speed-up " + format_speedup(target) + " is unreachable: achievable range [" +
                              format_speedup(best.min_speedup) + ", " + format_speedup(best.max_speedup) +
                              "], closest " + format_speedup(best.measured_speedup));
    }
    return best;
}

void check_calibration_inputs(const Cascade& cascade, const Dataset& calibration, double target,
                              double tolerance) {
    if (cascade.size() < 2) {
        throw ValidationError("threshold calibration needs at least two stages");
    }
    if (calibration.empty()) {
        throw ValidationError("threshold calibration needs a non-empty calibration set");
    }
    if (!(target > 0.0) || !(tolerance >= 0.0)) {
        throw ValidationError("target speed-up must be positive and tolerance non-negative");
    }
    const double ceiling = static_cast<double>(cascade.full_model_cost()) / cascade.stages()[0].layer_cost;
    if (target > ceiling * (1.0 + tolerance)) {
        throw ValidationError("target speed-up " + format_speedup(target) + " exceeds the maximum " +
                              format_speedup(ceiling) + " reached when every instance exits at stage 0");
    }
}

}  // namespace

ThresholdCalibration calibrate_threshold(const Cascade& cascade, const Dataset& calibration,
                                         double target, double tolerance) {
    check_calibration_inputs(cascade, calibration, target, tolerance);
    const ConfidenceTable table = tabulate(cascade, calibration);
    return sweep(cascade, table, table.values, target, tolerance,
                 [&](double tau) { return std::vector<double>(table.cols, tau); });
}

ThresholdCalibration calibrate_stage_threshold(const Cascade& cascade, std::size_t stage,
                                               const Dataset& calibration, double target,
                                               double tolerance) {
    check_calibration_inputs(cascade, calibration, target, tolerance);
    if (stage + 1 >= cascade.size()) {
        throw ValidationError("stage " + std::to_string(stage) + " has no threshold");
    }
    const ConfidenceTable table = tabulate(cascade, calibration);
    std::vector<double> candidates;
    candidates.reserve(table.rows);
    for (std::size_t i = 0; i < table.rows; ++i) {
        candidates.push_back(table.at(i, stage));
    }
    const std::vector<double> base(cascade.thresholds().begin(), cascade.thresholds().end());
    return sweep(cascade, table, std::move(candidates), target, tolerance, [&](double tau) {
        std::vector<double> thresholds = base;
        thresholds[stage] = tau;
        return thresholds;
    });
}

CascadeDescription load_cascade_description(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open cascade description '" + path.string() + "'");
    }
    try {
        const json j = json::parse(in);
        CascadeDescription desc;
        for (const json& stage : j.at("stages")) {
            desc.stages.push_back({stage.at("model_path").get<std::string>(), stage.at("layer_cost").get<int>()});
        }
        desc.thresholds = j.at("thresholds").get<std::vector<double>>();
        desc.full_model_cost = j.value("full_model_cost", 12);
        return desc;
    } catch (const json::exception& e) {
        throw SchemaError("malformed cascade description '" + path.string() + "': " + e.what());
    }
}

void save_cascade_description(const CascadeDescription& description, const std::filesystem::path& path) {
    ojson j;
    ojson stages = ojson::array();
    for (const auto& stage : description.stages) {
        stages.push_back({{"model_path", stage.model_path.generic_string()}, {"layer_cost", stage.layer_cost}});
    }
    j["stages"] = std::move(stages);
    j["thresholds"] = description.thresholds;
    j["full_model_cost"] = description.full_model_cost;
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ValidationError("cannot write cascade description '" + path.string() + "'");
    }
    out << j.dump(1) << '\n';
}

Cascade instantiate(const CascadeDescription& description, const std::filesystem::path& base_dir) {
    std::vector<StageSpec> stages;
    for (const auto& stage : description.stages) {
        const auto path = stage.model_path.is_absolute() ? stage.model_path : base_dir / stage.model_path;
        stages.push_back({std::make_shared<const ClassifierModel>(load_model(path)), stage.layer_cost});
    }
    return Cascade(std::move(stages), description.thresholds, description.full_model_cost);
}

void write_traces(std::span<const ExitTrace> traces, std::ostream& out) {
    for (const ExitTrace& t : traces) {
        ojson j;
        j["id"] = t.instance_id;
        j["exit_stage"] = t.exit_stage;
        j["probs"] = t.distribution.probs;
        j["confidence"] = t.confidence;
        j["executed_costs"] = t.executed_costs;
        j["total_cost"] = t.total_cost;
        out << j.dump() << '\n';
    }
}

std::vector<ExitTrace> read_traces(std::istream& in) {
    std::vector<ExitTrace> traces;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const json j = json::parse(text);
            ExitTrace t;
            t.instance_id = j.at("id").get<std::string>();
            t.exit_stage = j.at("exit_stage").get<std::size_t>();
            t.distribution.probs = j.at("probs").get<std::vector<double>>();
            t.confidence = j.at("confidence").get<double>();
            t.executed_costs = j.at("executed_costs").get<std::vector<int>>();
            t.total_cost = j.at("total_cost").get<std::int64_t>();
            traces.push_back(std::move(t));
        } catch (const json::exception& e) {
            throw ParseError(line, std::string("malformed trace: ") + e.what());
        }
    }
    return traces;
}

void save_traces(std::span<const ExitTrace> traces, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ValidationError("cannot write traces '" + path.string() + "'");
    }
    write_traces(traces, out);
}

std::vector<ExitTrace> load_traces(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open traces '" + path.string() + "'");
    }
    return read_traces(in);
}

}  // namespace cascadex
