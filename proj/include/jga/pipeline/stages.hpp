#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "jga/io/json_io.hpp"

namespace jga {

struct SceneSpec {
    std::string name;
    std::string kind; // sphere | box | capsule-person
    int count = 1200;
};

// Everything a full pipeline run needs, serializable as one JSON document.
struct PipelineConfig {
    int resolution = 64;
    int latent_channels = 4;
    int views = 5; // the last view is held out from all training
    int image_size = 64;
    std::uint64_t seed = 0;
    std::vector<SceneSpec> scenes;

    int vae_iters = 5000;
    double vae_lr = 1e-3;
    int vae_warmup = 400;
    double vae_attr_target = 8e-3; // early-stop thresholds, 0 disables
    double vae_iou_target = 0.92;

    int refine_iters = 200;
    double refine_lr = 1e-3;

    int unify_iters = 400;
    double unify_lr = 1e-3;
    int unify_width = 24;
    int unify_blocks = 4;

    int bridge_iters = 2500;
    double bridge_lr = 1e-3;
    int bridge_width = 16;

    SamplerRunConfig sampler;

    void validate() const;
};

// desk (4 scenes), desk-sphere (single-scene smoke), tiny (fast determinism).
PipelineConfig preset_config(const std::string& name);

std::string pipeline_config_json(const PipelineConfig& cfg);
PipelineConfig parse_pipeline_config(const std::string& text);
PipelineConfig read_pipeline_config(const std::filesystem::path& path);
// Hash of the serialized config; stamped into every stage manifest.
std::uint64_t config_hash(const PipelineConfig& cfg);

// Stage entry points. Each consumes prior stages' artifacts under `out`,
// writes its own subtree plus a manifest.json, and raises an error naming
// the producing stage when an upstream artifact is missing.
void stage_synth(const PipelineConfig& cfg, const std::filesystem::path& out);
void stage_voxelize(const PipelineConfig& cfg, const std::filesystem::path& out);
void stage_train_unify(const PipelineConfig& cfg, const std::filesystem::path& out);
void stage_train_vae(const PipelineConfig& cfg, const std::filesystem::path& out);
void stage_encode(const PipelineConfig& cfg, const std::filesystem::path& out);
void stage_train_bridge(const PipelineConfig& cfg, const std::filesystem::path& out);
void stage_sample(const PipelineConfig& cfg, const std::filesystem::path& out);
void stage_decode(const PipelineConfig& cfg, const std::filesystem::path& out);
void stage_render(const PipelineConfig& cfg, const std::filesystem::path& out);
// Returns the metrics report JSON it wrote to eval/report.json.
std::string stage_eval(const PipelineConfig& cfg, const std::filesystem::path& out);

// Dispatch by subcommand name ("synth" ... "eval", "run-all"); times the
// stage and appends the wall time to the sibling run log, keeping the
// artifact tree itself byte-deterministic.
void run_stage(const std::string& name, const PipelineConfig& cfg,
               const std::filesystem::path& out);
// All stages in pipeline order; returns the final metrics report JSON.
std::string run_all(const PipelineConfig& cfg, const std::filesystem::path& out);

const std::vector<std::string>& stage_names(); // pipeline order, sans run-all
std::filesystem::path run_log_path(const std::filesystem::path& out);

} // namespace jga
