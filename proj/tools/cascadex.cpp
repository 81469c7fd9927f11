// cascadex: train, label, calibrate and evaluate confidence-exiting model
// cascades from JSON experiment configs.
//
// Exit codes: 0 success, 1 validation error, 2 runtime or numeric error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "cascadex/dataset.hpp"
#include "cascadex/error.hpp"
#include "cascadex/pipeline.hpp"
#include "cascadex/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kValidationExit = 1;
constexpr int kRuntimeExit = 2;

struct CommonFlags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", flags.out, "Output directory (overrides output_dir)");
    cmd->add_option("--seed", flags.seed, "Training seed (overrides train.seed)");
    cmd->add_option("--threads", flags.threads, "Worker threads")->check(CLI::PositiveNumber);
}

cascadex::PipelineConfig resolve_config(const CommonFlags& flags) {
    cascadex::PipelineConfig config = cascadex::load_pipeline_config(flags.config);
    if (!flags.out.empty()) {
        config.output_dir = flags.out;
    }
    if (flags.seed) {
        config.train.seed = *flags.seed;
    }
    if (flags.threads) {
        config.threads = *flags.threads;
    }
    return config;
}

void generate(const std::string& task, std::size_t size, std::uint64_t seed, const fs::path& out) {
    fs::create_directories(out);
    const struct {
        const char* name;
        std::uint64_t salt;
    } splits[] = {{"train", 0}, {"calibration", 1}, {"eval", 2}};
    for (const auto& split : splits) {
        const std::string prefix = std::string(split.name) + "-";
        cascadex::Dataset data = [&] {
            if (task == "hard") {
                cascadex::synthetic::HardSubpopulationSpec spec;
                spec.size = size;
                spec.seed = seed * 3 + split.salt;
                spec.id_prefix = prefix;
                return cascadex::synthetic::hard_subpopulation(spec);
            }
            cascadex::synthetic::CurvedBoundarySpec spec;
            spec.size = size;
            spec.seed = seed * 3 + split.salt;
            spec.id_prefix = prefix;
            return cascadex::synthetic::curved_boundary(spec);
        }();
        cascadex::save_dataset(data, out / (std::string(split.name) + ".jsonl"));
    }
    std::cout << "wrote train/calibration/eval splits of " << size << " instances to " << out.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Confidence-exiting model cascades with difficulty-aware training"};
    app.require_subcommand(1);

    CommonFlags train_flags, label_flags, run_flags, sweep_flags, metrics_flags;
    auto* train = app.add_subcommand("train", "Train every cascade stage");
    add_common(train, train_flags);
    auto* label = app.add_subcommand("label", "Label training-set difficulty with cross-fitted models");
    add_common(label, label_flags);
    auto* run = app.add_subcommand("run", "Calibrate thresholds per target speed-up and evaluate");
    add_common(run, run_flags);
    auto* sweep = app.add_subcommand("sweep", "Write the speed-up/accuracy trade-off table over a tau grid");
    add_common(sweep, sweep_flags);

    auto* metrics = app.add_subcommand("metrics", "Recompute a metrics report from a trace file");
    add_common(metrics, metrics_flags);
    std::string traces_path, metrics_out;
    metrics->add_option("--traces", traces_path, "Trace file (JSONL)")->required()->check(CLI::ExistingFile);
    metrics->add_option("--report", metrics_out, "Write the JSON report here instead of stdout");

    auto* analyze = app.add_subcommand("analyze", "Predict the gain of inserting a model into a cascade");
    std::string scenario_path, analyze_out;
    analyze->add_option("scenario", scenario_path, "Scenario file (JSON)")->required()->check(CLI::ExistingFile);
    analyze->add_option("--out", analyze_out, "Also write the JSON report here");

    auto* gen = app.add_subcommand("generate", "Write synthetic train/calibration/eval splits");
    std::string task = "curved";
    std::size_t size = 1000;
    std::uint64_t gen_seed = 0;
    std::string gen_out = "data";
    gen->add_option("--task", task, "Synthetic task")->check(CLI::IsMember({"curved", "hard"}));
    gen->add_option("--size", size, "Instances per split")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("--out", gen_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kValidationExit;
    }

    try {
        if (*train) {
            cascadex::cmd_train(resolve_config(train_flags), std::cout);
        } else if (*label) {
            cascadex::cmd_label(resolve_config(label_flags), std::cout);
        } else if (*run) {
            cascadex::cmd_run(resolve_config(run_flags), std::cout);
        } else if (*sweep) {
            cascadex::cmd_sweep(resolve_config(sweep_flags), std::cout);
        } else if (*metrics) {
            cascadex::cmd_metrics(resolve_config(metrics_flags), traces_path, metrics_out, std::cout);
        } else if (*analyze) {
            std::optional<fs::path> out;
            if (!analyze_out.empty()) {
                out = analyze_out;
            }
            cascadex::cmd_analyze(scenario_path, out, std::cout);
        } else if (*gen) {
            generate(task, size, gen_seed, gen_out);
        }
    } catch (const cascadex::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidationExit;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeExit;
    }
    return 0;
}
