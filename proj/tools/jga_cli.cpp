#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jga/pipeline/stages.hpp"

namespace {

int env_threads() {
    const char* raw = std::getenv("JGA_THREADS");
    if (!raw) return 1;
    char* end = nullptr;
    long v = std::strtol(raw, &end, 10);
    jga::check(end && *end == '\0' && v >= 1, "JGA_THREADS must be a positive integer");
    return static_cast<int>(v);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"jga: sparse-gaussian human reconstruction pipeline"};
    app.require_subcommand(1);

    std::string preset = "desk";
    std::string config_path;
    std::string out = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int resolution = 0;
    int steps = -1;
    double churn_ratio = -1;
    double guidance = std::numeric_limits<double>::quiet_NaN();

    auto add_common = [&](CLI::App* cmd) {
        auto* p = cmd->add_option("--preset", preset, "built-in config: desk, desk-sphere, tiny");
        auto* c = cmd->add_option("--config", config_path, "pipeline config JSON path");
        p->excludes(c);
        c->excludes(p);
        cmd->add_option("--out", out, "artifact tree root");
        cmd->add_option("--seed", seed, "master seed override")
            ->each([&](const std::string&) { seed_set = true; });
        cmd->add_option("--resolution", resolution, "voxel grid side override");
        cmd->add_option("--steps", steps, "sampler step count override");
        cmd->add_option("--churn-ratio", churn_ratio, "fraction of sampler steps that churn");
        cmd->add_option("--guidance", guidance, "score guidance multiplier");
    };

    std::vector<std::string> commands = jga::stage_names();
    commands.push_back("run-all");
    std::map<std::string, CLI::App*> subs;
    for (const auto& name : commands) {
        CLI::App* cmd = app.add_subcommand(name, name == "run-all"
                                                     ? "every stage in pipeline order"
                                                     : "run the " + name + " stage");
        add_common(cmd);
        subs[name] = cmd;
    }

    CLI11_PARSE(app, argc, argv);

    try {
        (void)env_threads(); // validated; every module here is single-threaded

        jga::PipelineConfig cfg = config_path.empty()
                                      ? jga::preset_config(preset)
                                      : jga::read_pipeline_config(config_path);
        if (seed_set) cfg.seed = seed;
        if (resolution > 0) cfg.resolution = resolution;
        if (steps >= 0) cfg.sampler.steps = steps;
        if (churn_ratio >= 0) cfg.sampler.churn_step_ratio = churn_ratio;
        if (guidance == guidance) cfg.sampler.guidance = guidance;
        cfg.validate();

        for (const auto& name : commands) {
            if (!subs[name]->parsed()) continue;
            if (name == "run-all") {
                std::string report = jga::run_all(cfg, out);
                std::fputs(report.c_str(), stdout);
            } else {
                jga::run_stage(name, cfg, out);
            }
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
