#include "cascadex/pipeline.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cascadex/analysis.hpp"
#include "cascadex/cascade.hpp"
#include "cascadex/difficulty.hpp"
#include "cascadex/error.hpp"
#include "cascadex/metrics.hpp"
#include "cascadex/parallel.hpp"

namespace cascadex {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

void PipelineConfig::validate() const {
    if (stages.empty()) {
        throw ValidationError("config: at least one stage is required");
    }
    for (std::size_t k = 0; k < stages.size(); ++k) {
        if (stages[k].layer_cost < 1) {
            throw ValidationError("config: stage layer_cost must be positive");
        }
        if (k > 0 && stages[k].layer_cost < stages[k - 1].layer_cost) {
            throw ValidationError("config: stages must be sorted by ascending layer_cost");
        }
    }
    if (full_model_cost < 1) {
        throw ValidationError("config: full_model_cost must be positive");
    }
    train.validate();
    if (!(tolerance >= 0.0)) {
        throw ValidationError("config: tolerance must be non-negative");
    }
    for (double target : target_speedups) {
        if (!(target > 0.0)) {
            throw ValidationError("config: target speed-ups must be positive");
        }
    }
    for (double tau : sweep_taus) {
        if (!(tau >= 0.0 && tau <= 1.0)) {
            throw ValidationError("config: sweep taus must lie in [0, 1]");
        }
    }
}

Architecture PipelineConfig::labeling_architecture() const {
    return difficulty_architecture.value_or(stages.front().architecture);
}

std::vector<double> PipelineConfig::effective_sweep_taus() const {
    if (!sweep_taus.empty()) {
        return sweep_taus;
    }
    std::vector<double> taus;
    for (int k = 0; k <= 50; ++k) {
        taus.push_back(k / 50.0);
    }
    return taus;
}

namespace {

fs::path resolve(const fs::path& base, const fs::path& p) {
    if (p.empty() || p.is_absolute()) {
        return p;
    }
    return (base / p).lexically_normal();
}

}  // namespace

PipelineConfig parse_pipeline_config(std::string_view json_text, const fs::path& base_dir) {
    PipelineConfig config;
    try {
        const json j = json::parse(json_text);
        auto path_field = [&](const char* key) -> fs::path {
            auto it = j.find(key);
            return it == j.end() ? fs::path() : resolve(base_dir, it->get<std::string>());
        };
        config.train_data = path_field("train_data");
        config.calibration_data = path_field("calibration_data");
        config.eval_data = path_field("eval_data");
        config.format = parse_dataset_format(j.value("format", "jsonl_features"));
        config.load.text_dim = j.value("text_dim", config.load.text_dim);
        if (auto it = j.find("num_classes"); it != j.end()) {
            config.load.num_classes = it->get<std::size_t>();
        }

        for (const json& stage : j.at("stages")) {
            config.stages.push_back({Architecture::parse(stage.at("architecture").get<std::string>()),
                                     stage.at("layer_cost").get<int>()});
        }
        config.full_model_cost = j.value("full_model_cost", config.full_model_cost);

        if (auto t = j.find("train"); t != j.end()) {
            TrainConfig& tc = config.train;
            tc.epochs = t->value("epochs", tc.epochs);
            if (auto lr = t->find("learning_rate"); lr != t->end() && !lr->is_null()) {
                tc.learning_rate = lr->get<double>();
            }
            tc.batch_size = t->value("batch_size", tc.batch_size);
            tc.lambda = t->value("lambda", tc.lambda);
            tc.epsilon = t->value("epsilon", tc.epsilon);
            tc.seed = t->value("seed", tc.seed);
            tc.pair_cap = t->value("pair_cap", tc.pair_cap);
        }

        if (auto d = j.find("difficulty"); d != j.end()) {
            config.folds = d->value("folds", config.folds);
            config.num_seeds = d->value("seeds", config.num_seeds);
            config.fold_seed = d->value("fold_seed", config.fold_seed);
            if (auto arch = d->find("architecture"); arch != d->end()) {
                config.difficulty_architecture = Architecture::parse(arch->get<std::string>());
            }
            if (auto report = d->find("report"); report != d->end()) {
                config.difficulty_report = resolve(base_dir, report->get<std::string>());
            }
        }

        config.target_speedups = j.value("target_speedups", std::vector<double>{});
        config.tolerance = j.value("tolerance", config.tolerance);
        config.sweep_taus = j.value("sweep_taus", std::vector<double>{});
        if (auto it = j.find("f1_positive_class"); it != j.end() && !it->is_null()) {
            config.f1_positive_class = it->get<std::size_t>();
        }
        config.output_dir = resolve(base_dir, j.value("output_dir", std::string("out")));
        config.threads = j.value("threads", config.threads);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed config: ") + e.what());
    }
    config.validate();
    return config;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open config '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_pipeline_config(buffer.str(), path.parent_path());
}

fs::path OutputLayout::model(std::size_t stage) const {
    return root / "models" / ("stage_" + std::to_string(stage) + ".json");
}

fs::path OutputLayout::run_dir(double target) const {
    std::ostringstream name;
    name << "run_" << target << "x";
    return root / name.str();
}

namespace {

Dataset load_split(const PipelineConfig& config, const fs::path& path, const char* what) {
    if (path.empty()) {
        throw ValidationError(std::string("config: '") + what + "' is not set");
    }
    return load_dataset(path, config.format, config.load);
}

std::optional<std::map<std::string, int>> difficulty_of(const Dataset& data) {
    if (!data.has_difficulty()) {
        return std::nullopt;
    }
    std::map<std::string, int> labels;
    for (const Instance& inst : data.instances()) {
        labels.emplace(inst.id, *inst.difficulty);
    }
    return labels;
}

Dataset attach_training_difficulty(const PipelineConfig& config, const OutputLayout& layout, Dataset data) {
    if (config.difficulty_report) {
        return data.with_difficulty(load_difficulty_report(*config.difficulty_report).label_map());
    }
    if (fs::exists(layout.difficulty())) {
        return data.with_difficulty(load_difficulty_report(layout.difficulty()).label_map());
    }
    if (data.has_difficulty()) {
        return data;
    }
    throw ValidationError("lambda > 0 needs difficulty labels: run `cascadex label` first, set "
                          "difficulty.report in the config, or add a 'difficulty' field to every training record");
}

Cascade load_trained_cascade(const OutputLayout& layout) {
    if (!fs::exists(layout.cascade())) {
        throw ValidationError("no trained cascade at '" + layout.cascade().string() + "': run `cascadex train` first");
    }
    return instantiate(load_cascade_description(layout.cascade()), layout.root);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ValidationError("cannot write '" + path.string() + "'");
    }
    out << text;
}

EvaluateOptions evaluate_options(const PipelineConfig& config, std::size_t num_stages) {
    EvaluateOptions options;
    options.num_stages = num_stages;
    options.f1_positive_class = config.f1_positive_class;
    return options;
}

}  // namespace

void cmd_train(const PipelineConfig& config, std::ostream& log) {
    const OutputLayout layout{config.output_dir};
    Dataset data = load_split(config, config.train_data, "train_data");
    if (config.train.lambda > 0.0) {
        data = attach_training_difficulty(config, layout, std::move(data));
    }
    fs::create_directories(layout.root / "models");

    std::vector<std::optional<TrainResult>> results(config.stages.size());
    parallel_for(config.stages.size(), config.threads,
                 [&](std::size_t k) { results[k] = train_with_log(data, config.stages[k].architecture, config.train); });

    std::ostringstream train_log;
    CascadeDescription description;
    description.full_model_cost = config.full_model_cost;
    for (std::size_t k = 0; k < results.size(); ++k) {
        const TrainResult& r = *results[k];
        save_model(r.model, layout.model(k));
        for (const EpochStats& e : r.log) {
            ojson line;
            line["stage"] = k;
            line["epoch"] = e.epoch;
            line["loss"] = e.loss;
            line["cross_entropy"] = e.cross_entropy;
            line["dar"] = e.dar;
            train_log << line.dump() << '\n';
        }
        description.stages.push_back({fs::path("models") / layout.model(k).filename(), config.stages[k].layer_cost});

        std::size_t hits = 0;
        for (const Instance& inst : data.instances()) {
            hits += r.model.predict(inst.features).predicted_class() == inst.label;
        }
        log << "stage " << k << " (" << config.stages[k].architecture.to_string() << ", "
            << config.stages[k].layer_cost << " layers): final loss " << r.log.back().loss
            << ", train accuracy " << static_cast<double>(hits) / static_cast<double>(data.size()) << '\n';
    }
    description.thresholds.assign(config.stages.size() - 1, 1.0);
    write_text(layout.train_log(), train_log.str());
    save_cascade_description(description, layout.cascade());
}

void cmd_label(const PipelineConfig& config, std::ostream& log) {
    const OutputLayout layout{config.output_dir};
    const Dataset data = load_split(config, config.train_data, "train_data");
    TrainConfig base = config.train;
    base.lambda = 0.0;
    DifficultyOptions options;
    options.num_folds = config.folds;
    options.num_seeds = config.num_seeds;
    options.fold_seed = config.fold_seed;
    options.threads = config.threads;
    const DifficultyReport report = label_difficulty(data, config.labeling_architecture(), base, options);

    fs::create_directories(layout.root);
    save_difficulty_report(report, layout.difficulty());
    save_dataset(data.with_difficulty(report.label_map()), layout.labeled_train());

    std::size_t difficult = 0;
    for (int d : report.labels) {
        difficult += d == 1;
    }
    log << "labeled " << report.labels.size() << " instances with " << config.labeling_architecture().to_string()
        << " (K=" << config.folds << ", " << config.num_seeds << " seeds): " << difficult << " difficult\n";
}

void cmd_run(const PipelineConfig& config, std::ostream& log) {
    if (config.target_speedups.empty()) {
        throw ValidationError("config: target_speedups is empty");
    }
    const OutputLayout layout{config.output_dir};
    const Cascade cascade = load_trained_cascade(layout);
    const CascadeDescription description = load_cascade_description(layout.cascade());
    const Dataset calibration = load_split(config, config.calibration_data, "calibration_data");
    const Dataset eval = load_split(config, config.eval_data, "eval_data");
    const auto eval_difficulty = difficulty_of(eval);

    for (double target : config.target_speedups) {
        const ThresholdCalibration cal = calibrate_threshold(cascade, calibration, target, config.tolerance);
        const Cascade tuned = cascade.with_thresholds(cal.thresholds);
        const auto traces = run_cascade(tuned, eval, config.threads);
        const MetricsReport report = evaluate(traces, eval, cascade.full_model_cost(),
                                              evaluate_options(config, cascade.size()),
                                              eval_difficulty ? &*eval_difficulty : nullptr);

        const fs::path dir = layout.run_dir(target);
        fs::create_directories(dir);
        CascadeDescription tuned_description = description;
        for (auto& stage : tuned_description.stages) {
            stage.model_path = fs::path("..") / stage.model_path;
        }
        tuned_description.thresholds = cal.thresholds;
        save_cascade_description(tuned_description, dir / "cascade.json");
        save_traces(traces, dir / "traces.jsonl");
        save_metrics_report(report, dir / "metrics.json");

        log << "target " << target << "x: tau " << cal.thresholds.front() << ", calibration "
            << cal.measured_speedup << "x, eval " << report.speedup << "x, accuracy " << report.accuracy;
        if (report.dis) {
            log << ", DIS " << *report.dis;
        }
        log << ", ECE " << report.ece << '\n';
    }
}

void cmd_sweep(const PipelineConfig& config, std::ostream& log) {
    const OutputLayout layout{config.output_dir};
    const Cascade cascade = load_trained_cascade(layout);
    const Dataset eval = load_split(config, config.eval_data, "eval_data");
    const auto eval_difficulty = difficulty_of(eval);

    std::vector<SweepRow> rows;
    for (double tau : config.effective_sweep_taus()) {
        const Cascade tuned = cascade.with_thresholds(std::vector<double>(cascade.size() - 1, tau));
        const auto traces = run_cascade(tuned, eval, config.threads);
        const MetricsReport report = evaluate(traces, eval, cascade.full_model_cost(),
                                              evaluate_options(config, cascade.size()),
                                              eval_difficulty ? &*eval_difficulty : nullptr);
        rows.push_back({tau, report.speedup, report.accuracy, report.dis, report.ece});
    }
    fs::create_directories(layout.root);
    std::ofstream out(layout.sweep(), std::ios::binary);
    if (!out) {
        throw ValidationError("cannot write '" + layout.sweep().string() + "'");
    }
    write_sweep_csv(rows, out);
    log << "wrote " << rows.size() << " sweep rows to " << layout.sweep().string() << '\n';
}

void cmd_metrics(const PipelineConfig& config, const fs::path& traces_path, const fs::path& out,
                 std::ostream& log) {
    const Dataset eval = load_split(config, config.eval_data, "eval_data");
    const auto eval_difficulty = difficulty_of(eval);
    const auto traces = load_traces(traces_path);
    const MetricsReport report = evaluate(traces, eval, config.full_model_cost,
                                          evaluate_options(config, config.stages.size()),
                                          eval_difficulty ? &*eval_difficulty : nullptr);
    if (out.empty()) {
        log << metrics_report_to_json(report);
    } else {
        save_metrics_report(report, out);
        log << "accuracy " << report.accuracy << ", speed-up " << report.speedup << "x\n";
    }
}

void cmd_analyze(const fs::path& scenario_path, const std::optional<fs::path>& out, std::ostream& log) {
    const GainScenario scenario = load_scenario(scenario_path);
    const GainReport report = analyze_scenario(scenario);
    if (out) {
        write_text(*out, gain_report_to_json(report));
    }
    log << "T = " << report.predicted_gain << '\n';
    log << "original exits = [";
    for (std::size_t k = 0; k < report.original_exits.counts.size(); ++k) {
        log << (k ? ", " : "") << report.original_exits.counts[k];
    }
    log << "]\n";
    if (report.gain_upper_bound) {
        log << "gain upper bound = " << *report.gain_upper_bound << ", max gain bound = " << *report.max_gain_bound
            << '\n';
    } else {
        log << "bounds not applicable: the new accuracy is outside [a_i, a_{i+1}]\n";
    }
    if (!report.original_exits.feasible) {
        log << "warning: the solved original exit counts include negative entries\n";
    }
}

}  // namespace cascadex
