#include "jga/io/json_io.hpp"

#include <json.hpp>

#include "jga/io/fileutil.hpp"

namespace jga {
namespace {

using nlohmann::json;

json parse_or_raise(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), e.byte);
    }
}

double num(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number())
        throw Error(std::string("missing or non-numeric field '") + key + "'");
    return j[key].get<double>();
}

} // namespace

std::string camera_json(const Camera& cam) {
    json j;
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    j["width"] = cam.width;
    j["height"] = cam.height;
    j["rotation"] = std::vector<double>(cam.rotation.m.begin(), cam.rotation.m.end());
    j["translation"] = {cam.translation.x, cam.translation.y, cam.translation.z};
    return j.dump(2) + "\n";
}

Camera parse_camera_json(const std::string& text) {
    json j = parse_or_raise(text);
    Camera cam;
    cam.fx = num(j, "fx");
    cam.fy = num(j, "fy");
    cam.cx = num(j, "cx");
    cam.cy = num(j, "cy");
    cam.width = int(num(j, "width"));
    cam.height = int(num(j, "height"));
    if (!j.contains("rotation") || !j["rotation"].is_array() || j["rotation"].size() != 9)
        throw Error("rotation must be 9 numbers, row-major");
    for (int i = 0; i < 9; ++i) cam.rotation.m[size_t(i)] = j["rotation"][size_t(i)].get<double>();
    if (!j.contains("translation") || !j["translation"].is_array() ||
        j["translation"].size() != 3)
        throw Error("translation must be 3 numbers");
    for (int i = 0; i < 3; ++i) cam.translation[i] = j["translation"][size_t(i)].get<double>();
    cam.validate();
    return cam;
}

void write_camera(const Camera& cam, const std::string& path) {
    write_file(path, camera_json(cam));
}

Camera read_camera(const std::string& path) { return parse_camera_json(read_file(path)); }

std::string loss_weights_json(const LossWeights& w) {
    json j;
    j["l1"] = w.l1;
    j["ssim"] = w.ssim;
    j["lpips"] = w.lpips;
    j["kl"] = w.kl;
    j["occupancy"] = w.occupancy;
    j["attr"] = w.attr;
    j["render"] = w.render;
    return j.dump(2) + "\n";
}

LossWeights parse_loss_weights_json(const std::string& text) {
    json j = parse_or_raise(text);
    LossWeights w;
    if (j.contains("l1")) w.l1 = num(j, "l1");
    if (j.contains("ssim")) w.ssim = num(j, "ssim");
    if (j.contains("lpips")) w.lpips = num(j, "lpips");
    if (j.contains("kl")) w.kl = num(j, "kl");
    if (j.contains("occupancy")) w.occupancy = num(j, "occupancy");
    if (j.contains("attr")) w.attr = num(j, "attr");
    if (j.contains("render")) w.render = num(j, "render");
    w.validate();
    return w;
}

std::string sampler_json(const SamplerRunConfig& cfg) {
    json j;
    j["steps"] = cfg.steps;
    j["churn_step_ratio"] = cfg.churn_step_ratio;
    j["guidance"] = cfg.guidance;
    j["schedule"] = cfg.schedule;
    j["seed"] = cfg.seed;
    return j.dump(2) + "\n";
}

SamplerRunConfig parse_sampler_json(const std::string& text) {
    json j = parse_or_raise(text);
    SamplerRunConfig cfg;
    if (j.contains("steps")) cfg.steps = int(num(j, "steps"));
    if (j.contains("churn_step_ratio")) cfg.churn_step_ratio = num(j, "churn_step_ratio");
    if (j.contains("guidance")) cfg.guidance = num(j, "guidance");
    if (j.contains("schedule")) {
        if (!j["schedule"].is_string()) throw Error("schedule must be a string");
        cfg.schedule = j["schedule"].get<std::string>();
    }
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    cfg.validate();
    return cfg;
}

SamplerRunConfig read_sampler_config(const std::string& path) {
    return parse_sampler_json(read_file(path));
}

std::string depth_scale_json(double scale) {
    json j;
    j["scale"] = scale;
    return j.dump(2) + "\n";
}

double parse_depth_scale_json(const std::string& text) {
    json j = parse_or_raise(text);
    double s = num(j, "scale");
    check(s > 0, "depth scale must be positive");
    return s;
}

} // namespace jga
