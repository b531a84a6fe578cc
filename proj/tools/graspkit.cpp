// graspkit CLI: annotate | bounds | build | eval | stats over a single
// JSON config. All randomness flows from the config seed (or --seed).
#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "graspkit/graspkit.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::int64_t seed = -1;
    int workers = 0;
    bool fresh = false;
    bool force = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "pipeline config JSON")->required();
    cmd->add_option("--seed", flags.seed, "override config seed");
    cmd->add_option("--workers", flags.workers, "override config worker count");
    cmd->add_flag("--fresh", flags.fresh, "recompute everything, ignore existing outputs");
    cmd->add_flag("--force", flags.force, "decode even when bin-spec hashes disagree");
}

graspkit::PipelineConfig resolve(const CommonFlags& flags) {
    graspkit::PipelineConfig config = graspkit::load_config(flags.config_path);
    if (flags.seed >= 0) config.seed = static_cast<std::uint64_t>(flags.seed);
    if (flags.workers > 0) config.workers = flags.workers;
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"grasp dataset toolkit: contact annotation, grasp token codec, "
                 "conversation generation, and evaluation"};
    app.require_subcommand(1);

    CommonFlags annotate_flags, bounds_flags, build_flags, eval_flags, stats_flags;
    std::string predictions_path;

    auto* annotate = app.add_subcommand("annotate",
                                        "contact-annotate and filter a grasp corpus");
    add_common(annotate, annotate_flags);
    auto* bounds = app.add_subcommand("bounds", "compute per-hand quantization bounds");
    add_common(bounds, bounds_flags);
    auto* build = app.add_subcommand("build", "generate conversation JSONL");
    add_common(build, build_flags);
    auto* eval = app.add_subcommand("eval", "evaluate predictions against references");
    add_common(eval, eval_flags);
    eval->add_option("--predictions", predictions_path,
                     "predictions JSONL (numeric poses or token streams)")
        ->required();
    auto* stats = app.add_subcommand("stats", "dataset statistics");
    add_common(stats, stats_flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (annotate->parsed()) {
            const auto config = resolve(annotate_flags);
            const auto result = graspkit::run_annotate(config, annotate_flags.fresh);
            std::cout << "annotate: total=" << result.total << " kept=" << result.kept
                      << " dropped=" << result.dropped << " failed=" << result.failed
                      << " resumed=" << result.skipped_existing << "\n";
            if (result.total == 0) std::cerr << "warning: empty grasp file\n";
            return result.exit_code;
        }
        if (bounds->parsed()) {
            const auto config = resolve(bounds_flags);
            const auto result = graspkit::run_bounds(config);
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
            for (const auto& [hand, spec] : result.specs) {
                std::cout << "bounds: " << hand << " dims=" << spec.dim_count()
                          << " n_bins=" << spec.n_bins << " corpus=" << spec.corpus_size
                          << " hash=" << graspkit::hash_hex(spec.corpus_hash) << "\n";
                for (std::size_t i = 0; i < spec.dim_count(); ++i)
                    std::cout << "  " << spec.dims[i] << ": [" << spec.lower[i] << ", "
                              << spec.upper[i] << "]\n";
            }
            return 0;
        }
        if (build->parsed()) {
            const auto config = resolve(build_flags);
            const auto result = graspkit::run_build(config);
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
            std::cout << "build: selected=" << result.selected_grasps
                      << " samples=" << result.samples << "\n";
            return 0;
        }
        if (eval->parsed()) {
            const auto config = resolve(eval_flags);
            const auto result = graspkit::run_eval(config, predictions_path, eval_flags.force);
            std::cout << graspkit::render_table(result.report);
            if (!result.unparsed_lines.empty())
                std::cerr << "warning: " << result.unparsed_lines.size()
                          << " prediction line(s) unparseable\n";
            return 0;
        }
        if (stats->parsed()) {
            const auto config = resolve(stats_flags);
            const auto result = graspkit::run_stats(config);
            std::cout << "Hand    Object  Grasp   Con.\n"
                      << result.hands << "\t" << result.objects << "\t" << result.grasps
                      << "\t" << result.conversations << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
