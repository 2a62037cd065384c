#pragma once

#include <cstdint>
#include <string>

#include "jga/core/types.hpp"

namespace jga {

struct SamplerRunConfig {
    int steps = 40;
    double churn_step_ratio = 0.1;
    double guidance = 1.0;
    std::string schedule = "ve";
    std::uint64_t seed = 0;

    void validate() const {
        check(steps >= 1, "sampler steps must be positive");
        check(schedule == "ve", "unknown schedule '" + schedule + "'");
        check(churn_step_ratio >= 0 && churn_step_ratio <= 1, "churn ratio outside [0,1]");
    }
};

std::string camera_json(const Camera& cam);
Camera parse_camera_json(const std::string& text);
void write_camera(const Camera& cam, const std::string& path);
Camera read_camera(const std::string& path);

std::string loss_weights_json(const LossWeights& w);
LossWeights parse_loss_weights_json(const std::string& text);

std::string sampler_json(const SamplerRunConfig& cfg);
SamplerRunConfig parse_sampler_json(const std::string& text);
SamplerRunConfig read_sampler_config(const std::string& path);

// Depth sidecar carries the unit scale: stored_value = depth * scale.
std::string depth_scale_json(double scale);
double parse_depth_scale_json(const std::string& text);

} // namespace jga
