#include "jga/pipeline/stages.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <json.hpp>

#include "jga/bridge/samplers.hpp"
#include "jga/bridge/training.hpp"
#include "jga/io/checkpoint.hpp"
#include "jga/io/fileutil.hpp"
#include "jga/io/obj.hpp"
#include "jga/io/ply.hpp"
#include "jga/io/png.hpp"
#include "jga/io/synth.hpp"
#include "jga/io/tensor_io.hpp"
#include "jga/metrics/geometry.hpp"
#include "jga/metrics/normals.hpp"
#include "jga/render/image_metrics.hpp"
#include "jga/unify/unify.hpp"
#include "jga/vae/losses.hpp"
#include "jga/vae/refine.hpp"

namespace jga {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kDepthScale = 8192.0; // u16 depth quantization, world units

json parse_or_raise(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), e.byte);
    }
}

fs::path need(const fs::path& p, const std::string& producer) {
    check(fs::exists(p),
          "missing artifact " + p.string() + "; run the " + producer + " stage first");
    return p;
}

std::string view_stem(int k) { return "view_" + std::to_string(k); }

fs::path views_dir(const fs::path& out, const std::string& scene) {
    return out / "scenes" / scene / "views";
}

Camera load_view_camera(const fs::path& out, const std::string& scene, int k) {
    auto p = need(views_dir(out, scene) / (view_stem(k) + "_camera.json"), "synth");
    return read_camera(p.string());
}

Image load_view_image(const fs::path& out, const std::string& scene, int k) {
    auto p = need(views_dir(out, scene) / (view_stem(k) + ".png"), "synth");
    return read_png_rgb(p.string());
}

DepthMap load_view_depth(const fs::path& out, const std::string& scene, int k) {
    auto pj = need(views_dir(out, scene) / (view_stem(k) + "_depth.json"), "synth");
    double scale = parse_depth_scale_json(read_file(pj.string()));
    auto pp = need(views_dir(out, scene) / (view_stem(k) + "_depth.png"), "synth");
    return read_depth_png(pp.string(), scale);
}

GaussianSet load_gt(const fs::path& out, const std::string& scene) {
    return read_ply(need(out / "scenes" / scene / "gt.ply", "synth").string());
}

SmplMesh load_proxy(const fs::path& out, const std::string& scene) {
    return read_obj(need(out / "scenes" / scene / "proxy.obj", "synth").string());
}

SparseVoxelTensor load_voxels(const fs::path& out, const std::string& scene) {
    return read_voxels(need(out / "voxels" / (scene + ".jgat"), "voxelize").string());
}

void write_manifest(const fs::path& dir, const std::string& stage,
                    std::vector<std::string> inputs, const PipelineConfig& cfg) {
    std::sort(inputs.begin(), inputs.end());
    std::ostringstream hash;
    hash << std::hex << config_hash(cfg);
    json j;
    j["stage"] = stage;
    j["inputs"] = inputs;
    j["config_hash"] = hash.str();
    j["seed"] = cfg.seed;
    fs::create_directories(dir);
    write_file((dir / "manifest.json").string(), j.dump(2) + "\n");
}

// Latent with the posterior mean on active cells and occupancy 0/1; the
// deterministic counterpart of reparameterize() for dataset building.
LatentGrid mean_latent(const LatentDistribution& d) {
    int r = d.mean.resolution();
    int f = d.mean.channels();
    LatentGrid z(r, f + 1);
    for (int x = 0; x < r; ++x)
        for (int y = 0; y < r; ++y)
            for (int zz = 0; zz < r; ++zz) {
                std::size_t cell = (static_cast<std::size_t>(x) * r + y) * r + zz;
                if (!d.mask[cell]) continue;
                for (int c = 0; c < f; ++c) z.at(x, y, zz, c) = d.mean.at(x, y, zz, c);
                z.at(x, y, zz, f) = 1.0;
            }
    return z;
}

VaeConfig vae_config(const PipelineConfig& cfg) {
    VaeConfig vc;
    vc.resolution = cfg.resolution;
    vc.latent_channels = cfg.latent_channels;
    vc.warmup_iters = cfg.vae_warmup;
    return vc;
}

int meta_int(const CheckpointMeta& meta, const std::string& key, const std::string& path) {
    auto it = meta.find(key);
    check(it != meta.end(), "checkpoint " + path + " lacks the '" + key + "' field");
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        throw Error("checkpoint " + path + ": field '" + key + "' is not an integer");
    }
}

std::unique_ptr<VaeModel> load_vae(const PipelineConfig& cfg, const fs::path& out) {
    auto p = need(out / "vae" / "vae.jgac", "train-vae").string();
    auto model = std::make_unique<VaeModel>(vae_config(cfg), derive_seed(cfg.seed, "vae-init"));
    CheckpointMeta meta = parse_checkpoint(read_file(p), model->params());
    check(meta_int(meta, "resolution", p) == cfg.resolution,
          "vae checkpoint " + p + " was trained at a different resolution; rerun train-vae");
    check(meta_int(meta, "latent_channels", p) == cfg.latent_channels,
          "vae checkpoint " + p + " was trained with different latent channels; rerun train-vae");
    return model;
}

std::unique_ptr<RefineModel> load_refine(const fs::path& out) {
    auto p = need(out / "vae" / "refine.jgac", "train-vae").string();
    auto model = std::make_unique<RefineModel>(attr::kCount, 0);
    parse_checkpoint(read_file(p), model->params());
    return model;
}

std::unique_ptr<UnifyNet> load_unify(const PipelineConfig& cfg, const fs::path& out,
                                     const std::string& file, int in_channels) {
    auto p = need(out / "unify" / file, "train-unify").string();
    auto bytes = read_file(p);
    auto net = std::make_unique<UnifyNet>(in_channels, derive_seed(cfg.seed, "unify-" + file),
                                          cfg.unify_width, cfg.unify_blocks);
    CheckpointMeta meta = parse_checkpoint(bytes, net->params());
    check(meta_int(meta, "in_channels", p) == in_channels,
          "unify checkpoint " + p + " has the wrong input width; rerun train-unify");
    return net;
}

std::unique_ptr<DenoiserModel> load_bridge(const PipelineConfig& cfg, const fs::path& out) {
    auto p = need(out / "bridge" / "bridge.jgac", "train-bridge").string();
    auto bytes = read_file(p);
    // Architecture travels in the meta block; build a probe store to read it.
    DenoiserConfig dc;
    dc.state_channels = cfg.latent_channels + 1;
    dc.width = cfg.bridge_width;
    auto model = std::make_unique<DenoiserModel>(dc, derive_seed(cfg.seed, "bridge-init"));
    CheckpointMeta meta = parse_checkpoint(bytes, model->params());
    check(meta_int(meta, "state_channels", p) == dc.state_channels &&
              meta_int(meta, "width", p) == dc.width,
          "bridge checkpoint " + p + " does not match the configured architecture; rerun train-bridge");
    if (auto it = meta.find("sigma_disp"); it != meta.end())
        model->set_sigma_disp(std::stod(it->second));
    return model;
}

std::uint64_t scene_seed(const PipelineConfig& cfg, const std::string& name) {
    return derive_seed(cfg.seed, "scene-" + name);
}

// ---- config (de)serialization ----------------------------------------------

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& at) {
    for (auto it = j.begin(); it != j.end(); ++it)
        check(allowed.count(it.key()) > 0,
              "pipeline config: unknown field '" + at + it.key() + "'");
}

void read_int_field(const json& j, const char* key, int& dst, const std::string& at) {
    auto it = j.find(key);
    if (it == j.end()) return;
    check(it->is_number_integer(),
          "pipeline config: field '" + at + key + "' must be an integer");
    dst = it->get<int>();
}

void read_num_field(const json& j, const char* key, double& dst, const std::string& at) {
    auto it = j.find(key);
    if (it == j.end()) return;
    check(it->is_number(), "pipeline config: field '" + at + key + "' must be a number");
    dst = it->get<double>();
}

void read_u64_field(const json& j, const char* key, std::uint64_t& dst,
                    const std::string& at) {
    auto it = j.find(key);
    if (it == j.end()) return;
    check(it->is_number_unsigned(),
          "pipeline config: field '" + at + key + "' must be a non-negative integer");
    dst = it->get<std::uint64_t>();
}

void read_str_field(const json& j, const char* key, std::string& dst,
                    const std::string& at) {
    auto it = j.find(key);
    if (it == j.end()) return;
    check(it->is_string(), "pipeline config: field '" + at + key + "' must be a string");
    dst = it->get<std::string>();
}

} // namespace

void PipelineConfig::validate() const {
    check(resolution >= 16 && resolution % 8 == 0,
          "pipeline config: resolution must be a multiple of 8, at least 16");
    check(latent_channels >= 1, "pipeline config: latent_channels must be positive");
    check(views >= 2, "pipeline config: need at least 2 views (one is held out)");
    check(image_size >= 16, "pipeline config: image_size must be at least 16");
    check(!scenes.empty(), "pipeline config: scenes must not be empty");
    std::set<std::string> names;
    for (const auto& s : scenes) {
        check(!s.name.empty(), "pipeline config: scene name must not be empty");
        check(s.name.find('/') == std::string::npos &&
                  s.name.find('\\') == std::string::npos,
              "pipeline config: scene name '" + s.name + "' must not contain path separators");
        check(names.insert(s.name).second,
              "pipeline config: duplicate scene name '" + s.name + "'");
        scene_kind_from(s.kind);
        check(s.count >= 1, "pipeline config: scene '" + s.name + "' count must be positive");
    }
    check(vae_iters >= 1 && refine_iters >= 0 && unify_iters >= 1 && bridge_iters >= 1,
          "pipeline config: iteration counts must be positive");
    check(vae_lr > 0 && refine_lr > 0 && unify_lr > 0 && bridge_lr > 0,
          "pipeline config: learning rates must be positive");
    check(vae_warmup >= 0, "pipeline config: vae warmup must be non-negative");
    check(unify_width >= 1 && unify_blocks >= 1 && bridge_width >= 1,
          "pipeline config: network widths must be positive");
    sampler.validate();
}

PipelineConfig preset_config(const std::string& name) {
    PipelineConfig cfg;
    if (name == "desk") {
        cfg.scenes = {{"sphere", "sphere", 1200},
                      {"box", "box", 1400},
                      {"person-a", "capsule-person", 1700},
                      {"person-b", "capsule-person", 1700}};
    } else if (name == "desk-sphere") {
        cfg.scenes = {{"sphere", "sphere", 900}};
        cfg.vae_iters = 1500;
        cfg.vae_warmup = 250;
        cfg.refine_iters = 120;
        cfg.unify_iters = 250;
        cfg.bridge_iters = 900;
        cfg.sampler.steps = 30;
    } else if (name == "tiny") {
        cfg.resolution = 32;
        cfg.views = 4;
        cfg.image_size = 32;
        cfg.scenes = {{"sphere", "sphere", 260}, {"box", "box", 300}};
        cfg.vae_iters = 140;
        cfg.vae_warmup = 60;
        cfg.refine_iters = 30;
        cfg.unify_iters = 60;
        cfg.bridge_iters = 150;
        cfg.sampler.steps = 10;
    } else {
        throw Error("unknown preset '" + name + "' (expected desk, desk-sphere or tiny)");
    }
    return cfg;
}

std::string pipeline_config_json(const PipelineConfig& cfg) {
    json j;
    j["resolution"] = cfg.resolution;
    j["latent_channels"] = cfg.latent_channels;
    j["views"] = cfg.views;
    j["image_size"] = cfg.image_size;
    j["seed"] = cfg.seed;
    j["scenes"] = json::array();
    for (const auto& s : cfg.scenes)
        j["scenes"].push_back({{"name", s.name}, {"kind", s.kind}, {"count", s.count}});
    j["vae"] = {{"iters", cfg.vae_iters},
                {"lr", cfg.vae_lr},
                {"warmup", cfg.vae_warmup},
                {"attr_target", cfg.vae_attr_target},
                {"iou_target", cfg.vae_iou_target}};
    j["refine"] = {{"iters", cfg.refine_iters}, {"lr", cfg.refine_lr}};
    j["unify"] = {{"iters", cfg.unify_iters},
                  {"lr", cfg.unify_lr},
                  {"width", cfg.unify_width},
                  {"blocks", cfg.unify_blocks}};
    j["bridge"] = {{"iters", cfg.bridge_iters},
                   {"lr", cfg.bridge_lr},
                   {"width", cfg.bridge_width}};
    j["sampler"] = {{"steps", cfg.sampler.steps},
                    {"churn_step_ratio", cfg.sampler.churn_step_ratio},
                    {"guidance", cfg.sampler.guidance},
                    {"schedule", cfg.sampler.schedule},
                    {"seed", cfg.sampler.seed}};
    return j.dump(2) + "\n";
}

PipelineConfig parse_pipeline_config(const std::string& text) {
    json j = parse_or_raise(text);
    check(j.is_object(), "pipeline config: top level must be a JSON object");
    reject_unknown(j,
                   {"resolution", "latent_channels", "views", "image_size", "seed",
                    "scenes", "vae", "refine", "unify", "bridge", "sampler"},
                   "");
    PipelineConfig cfg;
    cfg.scenes.clear();
    read_int_field(j, "resolution", cfg.resolution, "");
    read_int_field(j, "latent_channels", cfg.latent_channels, "");
    read_int_field(j, "views", cfg.views, "");
    read_int_field(j, "image_size", cfg.image_size, "");
    read_u64_field(j, "seed", cfg.seed, "");
    auto sc = j.find("scenes");
    check(sc != j.end() && sc->is_array() && !sc->empty(),
          "pipeline config: field 'scenes' must be a non-empty array");
    for (std::size_t i = 0; i < sc->size(); ++i) {
        const json& e = (*sc)[i];
        std::string at = "scenes[" + std::to_string(i) + "].";
        check(e.is_object(), "pipeline config: " + at.substr(0, at.size() - 1) +
                                 " must be an object");
        reject_unknown(e, {"name", "kind", "count"}, at);
        SceneSpec s;
        read_str_field(e, "name", s.name, at);
        read_str_field(e, "kind", s.kind, at);
        read_int_field(e, "count", s.count, at);
        check(!s.name.empty(), "pipeline config: field '" + at + "name' is required");
        check(!s.kind.empty(), "pipeline config: field '" + at + "kind' is required");
        cfg.scenes.push_back(s);
    }
    if (auto it = j.find("vae"); it != j.end()) {
        check(it->is_object(), "pipeline config: field 'vae' must be an object");
        reject_unknown(*it, {"iters", "lr", "warmup", "attr_target", "iou_target"}, "vae.");
        read_int_field(*it, "iters", cfg.vae_iters, "vae.");
        read_num_field(*it, "lr", cfg.vae_lr, "vae.");
        read_int_field(*it, "warmup", cfg.vae_warmup, "vae.");
        read_num_field(*it, "attr_target", cfg.vae_attr_target, "vae.");
        read_num_field(*it, "iou_target", cfg.vae_iou_target, "vae.");
    }
    if (auto it = j.find("refine"); it != j.end()) {
        check(it->is_object(), "pipeline config: field 'refine' must be an object");
        reject_unknown(*it, {"iters", "lr"}, "refine.");
        read_int_field(*it, "iters", cfg.refine_iters, "refine.");
        read_num_field(*it, "lr", cfg.refine_lr, "refine.");
    }
    if (auto it = j.find("unify"); it != j.end()) {
        check(it->is_object(), "pipeline config: field 'unify' must be an object");
        reject_unknown(*it, {"iters", "lr", "width", "blocks"}, "unify.");
        read_int_field(*it, "iters", cfg.unify_iters, "unify.");
        read_num_field(*it, "lr", cfg.unify_lr, "unify.");
        read_int_field(*it, "width", cfg.unify_width, "unify.");
        read_int_field(*it, "blocks", cfg.unify_blocks, "unify.");
    }
    if (auto it = j.find("bridge"); it != j.end()) {
        check(it->is_object(), "pipeline config: field 'bridge' must be an object");
        reject_unknown(*it, {"iters", "lr", "width"}, "bridge.");
        read_int_field(*it, "iters", cfg.bridge_iters, "bridge.");
        read_num_field(*it, "lr", cfg.bridge_lr, "bridge.");
        read_int_field(*it, "width", cfg.bridge_width, "bridge.");
    }
    if (auto it = j.find("sampler"); it != j.end()) {
        check(it->is_object(), "pipeline config: field 'sampler' must be an object");
        reject_unknown(*it, {"steps", "churn_step_ratio", "guidance", "schedule", "seed"},
                       "sampler.");
        read_int_field(*it, "steps", cfg.sampler.steps, "sampler.");
        read_num_field(*it, "churn_step_ratio", cfg.sampler.churn_step_ratio, "sampler.");
        read_num_field(*it, "guidance", cfg.sampler.guidance, "sampler.");
        read_str_field(*it, "schedule", cfg.sampler.schedule, "sampler.");
        read_u64_field(*it, "seed", cfg.sampler.seed, "sampler.");
    }
    cfg.validate();
    return cfg;
}

PipelineConfig read_pipeline_config(const fs::path& path) {
    return parse_pipeline_config(read_file(path.string()));
}

std::uint64_t config_hash(const PipelineConfig& cfg) {
    return fnv1a(pipeline_config_json(cfg));
}

// ---- stages -----------------------------------------------------------------

void stage_synth(const PipelineConfig& cfg, const fs::path& out) {
    fs::path dir = out / "scenes";
    for (const auto& s : cfg.scenes) {
        SynthScene scene = synth_scene(scene_kind_from(s.kind), s.count,
                                       scene_seed(cfg, s.name), cfg.views, cfg.image_size);
        fs::path sd = dir / s.name;
        fs::create_directories(sd / "views");
        write_ply(scene.gaussians, (sd / "gt.ply").string());
        write_obj(scene.proxy, (sd / "proxy.obj").string());
        for (int k = 0; k < cfg.views; ++k) {
            const auto& v = scene.views[k];
            fs::path vd = sd / "views";
            write_png(v.image, (vd / (view_stem(k) + ".png")).string());
            write_depth_png(v.depth, kDepthScale, (vd / (view_stem(k) + "_depth.png")).string());
            write_file((vd / (view_stem(k) + "_depth.json")).string(),
                       depth_scale_json(kDepthScale));
            write_camera(v.camera, (vd / (view_stem(k) + "_camera.json")).string());
        }
        std::printf("[synth] %s: %zu gaussians, %d views\n", s.name.c_str(),
                    scene.gaussians.size(), cfg.views);
    }
    write_manifest(dir, "synth", {}, cfg);
}

void stage_voxelize(const PipelineConfig& cfg, const fs::path& out) {
    fs::path dir = out / "voxels";
    fs::create_directories(dir);
    for (const auto& s : cfg.scenes) {
        GaussianSet set = load_gt(out, s.name);
        SparseVoxelTensor svt = voxelize(set, cfg.resolution);
        write_voxels(svt, (dir / (s.name + ".jgat")).string());
        std::printf("[voxelize] %s: %zu active voxels at R=%d\n", s.name.c_str(), svt.size(),
                    cfg.resolution);
    }
    write_manifest(dir, "voxelize", {"scenes"}, cfg);
}

void stage_train_unify(const PipelineConfig& cfg, const fs::path& out) {
    fs::path dir = out / "unify";
    fs::create_directories(dir);
    double tau = 4.0 / cfg.resolution; // two voxel edges

    std::vector<SparseVoxelTensor> cloud_in, cloud_tgt, mesh_in, mesh_tgt;
    for (const auto& s : cfg.scenes) {
        GaussianSet gt = load_gt(out, s.name);
        Camera cam = load_view_camera(out, s.name, 0);
        Image rgb = load_view_image(out, s.name, 0);
        DepthMap depth = load_view_depth(out, s.name, 0);

        PointCloud cloud = backproject_depth(depth, rgb, cam);
        check(!cloud.empty_depth, "view 0 of scene '" + s.name + "' has no depth; rerun synth");
        SparseVoxelTensor ci = voxelize_cloud(cloud, cfg.resolution);
        cloud_tgt.push_back(nn_targets(ci, gt));
        cloud_in.push_back(std::move(ci));

        SmplMesh proxy = load_proxy(out, s.name);
        check(color_smpl_by_projection(proxy, rgb, depth, cam, tau),
              "no proxy vertex of scene '" + s.name + "' is visible in view 0");
        SparseVoxelTensor mi = voxelize_mesh_vertices(proxy, cfg.resolution);
        mesh_tgt.push_back(nn_targets(mi, gt));
        mesh_in.push_back(std::move(mi));
    }

    auto train = [&](const char* tag, int in_ch, const std::vector<SparseVoxelTensor>& in,
                     const std::vector<SparseVoxelTensor>& tgt, const std::string& file) {
        UnifyNet net(in_ch, derive_seed(cfg.seed, "unify-" + file), cfg.unify_width,
                     cfg.unify_blocks);
        Adam opt(cfg.unify_lr);
        double loss = 0;
        for (int i = 0; i < cfg.unify_iters; ++i) {
            std::size_t s = i % in.size();
            loss = unify_train_step(net, in[s], tgt[s]);
            opt.step(net.params());
            if (i % 50 == 0 || i + 1 == cfg.unify_iters)
                std::printf("[train-unify] %s iter %d loss %.5f\n", tag, i, loss);
        }
        CheckpointMeta meta{{"in_channels", std::to_string(in_ch)},
                            {"width", std::to_string(cfg.unify_width)},
                            {"blocks", std::to_string(cfg.unify_blocks)}};
        save_checkpoint(net.params(), meta, (dir / file).string());
    };
    train("depth", kCloudChannels, cloud_in, cloud_tgt, "unify_depth.jgac");
    train("smpl", kMeshChannels, mesh_in, mesh_tgt, "unify_smpl.jgac");
    write_manifest(dir, "train-unify", {"scenes"}, cfg);
}

void stage_train_vae(const PipelineConfig& cfg, const fs::path& out) {
    fs::path dir = out / "vae";
    fs::create_directories(dir);
    VaeConfig vc = vae_config(cfg);
    vc.validate();

    int n = static_cast<int>(cfg.scenes.size());
    int train_views = cfg.views - 1; // the last view stays held out
    std::vector<SparseVoxelTensor> gt;
    std::vector<std::vector<ViewTarget>> views(n);
    for (int s = 0; s < n; ++s) {
        gt.push_back(load_voxels(out, cfg.scenes[s].name));
        for (int k = 0; k < train_views; ++k)
            views[s].push_back({load_view_camera(out, cfg.scenes[s].name, k),
                                load_view_image(out, cfg.scenes[s].name, k)});
    }

    VaeModel model(vc, derive_seed(cfg.seed, "vae-init"));
    Adam opt(cfg.vae_lr);
    Rng rng(derive_seed(cfg.seed, "vae-train"));
    std::vector<double> last_attr(n, 1e30), last_iou(n, 0.0);
    for (int i = 0; i < cfg.vae_iters; ++i) {
        int s = i % n;
        int v = (i / n) % train_views;
        auto losses = vae_training_step(model, gt[s], {views[s][v]}, i, rng);
        opt.step(model.params());
        if (i >= vc.warmup_iters) {
            last_attr[s] = losses.attr;
            last_iou[s] = losses.iou;
        }
        if (i % 25 == 0 || i + 1 == cfg.vae_iters)
            std::printf("[train-vae] iter %d total %.4f attr %.4f occ %.4f iou %.3f\n", i,
                        losses.total, losses.attr, losses.occupancy, losses.iou);
        if (cfg.vae_attr_target > 0 && i >= vc.warmup_iters + n) {
            bool done = true;
            for (int k = 0; k < n; ++k)
                done = done && last_attr[k] < cfg.vae_attr_target &&
                       last_iou[k] > cfg.vae_iou_target;
            if (done) {
                std::printf("[train-vae] early stop at iter %d\n", i);
                break;
            }
        }
    }
    CheckpointMeta meta{{"resolution", std::to_string(cfg.resolution)},
                        {"latent_channels", std::to_string(cfg.latent_channels)}};
    save_checkpoint(model.params(), meta, (dir / "vae.jgac").string());

    RefineModel refine(attr::kCount, derive_seed(cfg.seed, "refine-init"));
    Adam ropt(cfg.refine_lr);
    LossWeights w;
    for (int i = 0; i < cfg.refine_iters; ++i) {
        int s = i % n;
        int v = (i / n) % train_views;
        auto dist = model.encode(gt[s]);
        LatentGrid z = mean_latent(dist);
        auto dec = model.decode(z, PruneMode::kTeacherForced, &gt[s]);
        SparseVoxelTensor ref = refine.forward(dec.attrs);
        AttrLoss al = attr_loss(ref, gt[s]);
        GaussianSet pred = devoxelize(ref);
        RenderLoss rl = render_loss(pred, {views[s][v]}, w);
        std::vector<double> dg = devoxelize_backward(ref, rl.dgaussians);
        SparseVoxelTensor dref = SparseVoxelTensor::aligned(ref, attr::kCount);
        for (std::size_t r = 0; r < ref.size(); ++r)
            for (int c = 0; c < attr::kCount; ++c)
                dref.feature(r)[c] = w.attr * al.dpred.feature(r)[c] +
                                     w.render * dg[r * attr::kCount + c];
        refine.params().zero_grad();
        refine.backward(dref);
        ropt.step(refine.params());
        if (i % 25 == 0 || i + 1 == cfg.refine_iters)
            std::printf("[train-vae] refine iter %d attr %.4f render %.4f\n", i, al.value,
                        rl.value);
    }
    CheckpointMeta rmeta{{"attr_channels", std::to_string(attr::kCount)}};
    save_checkpoint(refine.params(), rmeta, (dir / "refine.jgac").string());
    write_manifest(dir, "train-vae", {"scenes", "voxels"}, cfg);
}

void stage_encode(const PipelineConfig& cfg, const fs::path& out) {
    fs::path dir = out / "latents";
    auto vae = load_vae(cfg, out);
    auto depth_net = load_unify(cfg, out, "unify_depth.jgac", kCloudChannels);
    auto smpl_net = load_unify(cfg, out, "unify_smpl.jgac", kMeshChannels);
    double tau = 4.0 / cfg.resolution;

    for (const auto& s : cfg.scenes) {
        fs::path sd = dir / s.name;
        fs::create_directories(sd);
        Camera cam = load_view_camera(out, s.name, 0);
        Image rgb = load_view_image(out, s.name, 0);
        DepthMap depth = load_view_depth(out, s.name, 0);

        SparseVoxelTensor gt = load_voxels(out, s.name);
        write_latent(mean_latent(vae->encode(gt)), (sd / "gt.jgat").string());

        PointCloud cloud = backproject_depth(depth, rgb, cam);
        SparseVoxelTensor ci = voxelize_cloud(cloud, cfg.resolution);
        GaussianSet partial = predict_gaussians(*depth_net, ci);
        SparseVoxelTensor pv = voxelize(partial, cfg.resolution);
        check(!pv.empty(), "depth route of scene '" + s.name + "' produced no voxels");
        write_latent(mean_latent(vae->encode(pv)), (sd / "depth.jgat").string());

        SmplMesh proxy = load_proxy(out, s.name);
        color_smpl_by_projection(proxy, rgb, depth, cam, tau);
        SparseVoxelTensor mi = voxelize_mesh_vertices(proxy, cfg.resolution);
        GaussianSet body = predict_gaussians(*smpl_net, mi);
        SparseVoxelTensor bv = voxelize(body, cfg.resolution);
        check(!bv.empty(), "body route of scene '" + s.name + "' produced no voxels");
        write_latent(mean_latent(vae->encode(bv)), (sd / "smpl.jgat").string());
        std::printf("[encode] %s: gt %zu / depth %zu / smpl %zu voxels\n", s.name.c_str(),
                    gt.size(), pv.size(), bv.size());
    }
    write_manifest(dir, "encode", {"scenes", "voxels", "unify", "vae"}, cfg);
}

void stage_train_bridge(const PipelineConfig& cfg, const fs::path& out) {
    fs::path dir = out / "bridge";
    fs::create_directories(dir);

    std::vector<BridgeBatchItem> items;
    for (const auto& s : cfg.scenes) {
        fs::path sd = out / "latents" / s.name;
        items.push_back(
            {grid_tensor(read_latent(need(sd / "gt.jgat", "encode").string())),
             grid_tensor(read_latent(need(sd / "depth.jgat", "encode").string())),
             grid_tensor(read_latent(need(sd / "smpl.jgat", "encode").string()))});
    }

    DenoiserConfig dc;
    dc.state_channels = cfg.latent_channels + 1;
    dc.width = cfg.bridge_width;
    // Calibrate the output preconditioner to the observed x0 - y spread.
    double disp2 = 0;
    std::size_t n = 0;
    for (const auto& it : items) {
        for (std::size_t i = 0; i < it.x0.size(); ++i) {
            double d = it.x0.data()[i] - it.y.data()[i];
            disp2 += d * d;
        }
        n += it.x0.size();
    }
    dc.sigma_disp = std::clamp(std::sqrt(disp2 / double(n)), 0.05, 5.0);
    DenoiserModel model(dc, derive_seed(cfg.seed, "bridge-init"));
    BridgeSchedule sched;
    Adam opt(cfg.bridge_lr);
    Rng rng(derive_seed(cfg.seed, "bridge-train"));
    for (int i = 0; i < cfg.bridge_iters; ++i) {
        std::vector<BridgeBatchItem> batch{items[i % items.size()]};
        double loss = bridge_train_step(model, batch, sched, rng);
        opt.step(model.params());
        if (i % 100 == 0 || i + 1 == cfg.bridge_iters)
            std::printf("[train-bridge] iter %d loss %.5f\n", i, loss);
    }
    char disp[32];
    std::snprintf(disp, sizeof(disp), "%.17g", dc.sigma_disp);
    CheckpointMeta meta{{"state_channels", std::to_string(dc.state_channels)},
                        {"width", std::to_string(dc.width)},
                        {"temb_dim", std::to_string(dc.temb_dim)},
                        {"sigma_disp", disp}};
    save_checkpoint(model.params(), meta, (dir / "bridge.jgac").string());
    write_manifest(dir, "train-bridge", {"latents"}, cfg);
}

void stage_sample(const PipelineConfig& cfg, const fs::path& out) {
    fs::path dir = out / "samples";
    auto model = load_bridge(cfg, out);
    BridgeSchedule sched;
    SamplerConfig sc;
    sc.steps = cfg.sampler.steps;
    sc.churn_step_ratio = cfg.sampler.churn_step_ratio;
    sc.guidance = cfg.sampler.guidance;
    sc.validate();

    for (const auto& s : cfg.scenes) {
        fs::path sd = out / "latents" / s.name;
        Tensor y = grid_tensor(read_latent(need(sd / "depth.jgat", "encode").string()));
        Tensor cond = grid_tensor(read_latent(need(sd / "smpl.jgat", "encode").string()));
        DenoiserScore fn(*model, y, cond, sched);
        Rng rng(derive_seed(derive_seed(cfg.seed, "sample-" + s.name),
                            std::to_string(cfg.sampler.seed)));
        Tensor x = sample_reverse_sde(fn, y, sched, sc, rng);
        fs::create_directories(dir / s.name);
        write_latent(tensor_grid(x), (dir / s.name / "latent.jgat").string());
        std::printf("[sample] %s: %d steps\n", s.name.c_str(), sc.steps);
    }
    write_manifest(dir, "sample", {"bridge", "latents"}, cfg);
}

void stage_decode(const PipelineConfig& cfg, const fs::path& out) {
    fs::path dir = out / "decoded";
    auto vae = load_vae(cfg, out);
    auto refine = load_refine(out);
    for (const auto& s : cfg.scenes) {
        auto p = need(out / "samples" / s.name / "latent.jgat", "sample");
        Tensor x = grid_tensor(read_latent(p.string()));
        BinarizeResult bin = occupancy_binarize(x);
        check(!bin.empty, "sampled latent of scene '" + s.name +
                              "' has no occupied cells; retrain the bridge or rerun sample "
                              "with more steps");
        DecodeResult dec = vae->decode(bin.grid, PruneMode::kPredicted);
        check(!dec.attrs.empty(), "decoding scene '" + s.name +
                                      "' pruned every voxel; retrain the vae or bridge");
        SparseVoxelTensor refined = refine->forward(dec.attrs);
        GaussianSet set = devoxelize(refined);
        fs::create_directories(dir / s.name);
        write_ply(set, (dir / s.name / "pred.ply").string());
        std::printf("[decode] %s: %zu gaussians\n", s.name.c_str(), set.size());
    }
    write_manifest(dir, "decode", {"samples", "vae"}, cfg);
}

void stage_render(const PipelineConfig& cfg, const fs::path& out) {
    fs::path dir = out / "renders";
    for (const auto& s : cfg.scenes) {
        GaussianSet set =
            read_ply(need(out / "decoded" / s.name / "pred.ply", "decode").string());
        fs::create_directories(dir / s.name);
        for (int k = 0; k < cfg.views; ++k) {
            Camera cam = load_view_camera(out, s.name, k);
            RenderResult res = render_gaussians(set, cam);
            write_png(res.color, (dir / s.name / (view_stem(k) + ".png")).string());
        }
        std::printf("[render] %s: %d views\n", s.name.c_str(), cfg.views);
    }
    write_manifest(dir, "render", {"decoded", "scenes"}, cfg);
}

std::string stage_eval(const PipelineConfig& cfg, const fs::path& out) {
    fs::path dir = out / "eval";
    int held_out = cfg.views - 1;
    json scenes = json::object();
    double m_psnr = 0, m_ssim = 0, m_cd = 0, m_p2s = 0, m_deg = 0;
    for (const auto& s : cfg.scenes) {
        Image gt_img = load_view_image(out, s.name, held_out);
        Image pred_img = read_png_rgb(
            need(out / "renders" / s.name / (view_stem(held_out) + ".png"), "render")
                .string());
        double v_psnr = psnr(pred_img, gt_img);
        double v_ssim = ssim(pred_img, gt_img);

        GaussianSet pred =
            read_ply(need(out / "decoded" / s.name / "pred.ply", "decode").string());
        GaussianSet gt = load_gt(out, s.name);
        std::vector<Vec3> pred_pts, gt_pts;
        for (const auto& g : pred.gaussians) pred_pts.push_back(g.position);
        for (const auto& g : gt.gaussians) gt_pts.push_back(g.position);
        double v_cd = chamfer(pred_pts, gt_pts);
        SmplMesh proxy = load_proxy(out, s.name);
        double v_p2s = p2s(pred_pts, proxy);
        NormalEstimate npred = estimate_normals(pred_pts);
        NormalEstimate ngt = estimate_normals(gt_pts);
        double v_deg = normal_error_deg(pred_pts, npred.normals, gt_pts, ngt.normals);

        scenes[s.name] = {{"psnr", v_psnr},
                          {"ssim", v_ssim},
                          {"chamfer", v_cd},
                          {"p2s", v_p2s},
                          {"normal_deg", v_deg}};
        m_psnr += v_psnr;
        m_ssim += v_ssim;
        m_cd += v_cd;
        m_p2s += v_p2s;
        m_deg += v_deg;
    }
    double n = static_cast<double>(cfg.scenes.size());
    json report;
    report["held_out_view"] = held_out;
    report["scenes"] = scenes;
    report["mean"] = {{"psnr", m_psnr / n},
                      {"ssim", m_ssim / n},
                      {"chamfer", m_cd / n},
                      {"p2s", m_p2s / n},
                      {"normal_deg", m_deg / n}};
    std::string text = report.dump(2) + "\n";
    fs::create_directories(dir);
    write_file((dir / "report.json").string(), text);
    write_manifest(dir, "eval", {"scenes", "decoded", "renders"}, cfg);
    std::printf("[eval] mean psnr %.2f ssim %.3f chamfer %.4f\n", m_psnr / n, m_ssim / n,
                m_cd / n);
    return text;
}

const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names = {
        "synth",  "voxelize",     "train-unify", "train-vae", "encode",
        "train-bridge", "sample", "decode",      "render",    "eval"};
    return names;
}

fs::path run_log_path(const fs::path& out) {
    fs::path base = out.has_filename() ? out : out.parent_path();
    fs::path log = base;
    log += ".run.log";
    return log;
}

void run_stage(const std::string& name, const PipelineConfig& cfg, const fs::path& out) {
    cfg.validate();
    using Fn = void (*)(const PipelineConfig&, const fs::path&);
    static const std::map<std::string, Fn> table = {
        {"synth", stage_synth},         {"voxelize", stage_voxelize},
        {"train-unify", stage_train_unify}, {"train-vae", stage_train_vae},
        {"encode", stage_encode},       {"train-bridge", stage_train_bridge},
        {"sample", stage_sample},       {"decode", stage_decode},
        {"render", stage_render},
    };
    auto t0 = std::chrono::steady_clock::now();
    if (name == "eval") {
        stage_eval(cfg, out);
    } else {
        auto it = table.find(name);
        check(it != table.end(), "unknown stage '" + name + "'");
        it->second(cfg, out);
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    // Wall time stays out of the artifact tree so identical runs stay
    // byte-identical; it lands in a sibling log instead.
    std::ofstream log(run_log_path(out), std::ios::app);
    log << name << " " << secs << "s\n";
}

std::string run_all(const PipelineConfig& cfg, const fs::path& out) {
    for (const auto& name : stage_names()) run_stage(name, cfg, out);
    return read_file((out / "eval" / "report.json").string());
}

} // namespace jga
