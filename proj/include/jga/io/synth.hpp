#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jga/core/types.hpp"

namespace jga {

enum class SceneKind { kSphere, kBox, kCapsulePerson };

SceneKind scene_kind_from(const std::string& name);
std::string scene_kind_name(SceneKind kind);

struct SynthView {
    Camera camera;
    Image image;
    DepthMap depth;
};

struct SynthScene {
    GaussianSet gaussians;
    std::vector<SynthView> views;
    SmplMesh proxy;
};

// Camera on an orbit of the origin (radius 2.6, slight elevation), square
// image, y-down pinhole looking at the center.
Camera orbit_camera(int index, int n_views, int image_size);

// Deterministic textured surface scene: `count` Gaussians on the shape's
// surface, rendered from n_views orbit cameras (images and depth come from
// the renderer, so every artifact is mutually consistent), plus a coarse
// proxy mesh standing in for the body prior.
SynthScene synth_scene(SceneKind kind, int count, std::uint64_t seed, int n_views = 4,
                       int image_size = 64);

// Proxy mesh generators, exposed for tests.
SmplMesh uv_sphere_mesh(const Vec3& center, double radius, int segments, int rings);
SmplMesh box_mesh(const Vec3& half_extent, int subdiv);
SmplMesh capsule_person_mesh();

} // namespace jga
