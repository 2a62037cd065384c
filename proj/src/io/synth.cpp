#include "jga/io/synth.hpp"

#include <cmath>

#include "jga/nn/rng.hpp"
#include "jga/render/rasterizer.hpp"

namespace jga {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Quaternion rotating +z onto dir (unit).
Quat z_to(const Vec3& dir) {
    Vec3 ez{0, 0, 1};
    double c = ez.dot(dir);
    if (c > 1 - 1e-12) return {1, 0, 0, 0};
    if (c < -1 + 1e-12) return {0, 1, 0, 0}; // 180 degrees about x
    Vec3 axis = ez.cross(dir).normalized();
    double half = std::acos(std::clamp(c, -1.0, 1.0)) * 0.5;
    double s = std::sin(half);
    return {std::cos(half), axis.x * s, axis.y * s, axis.z * s};
}

Vec3 smooth_texture(const Vec3& p, int style) {
    auto wave = [&](double u, double phase) { return 0.5 + 0.35 * std::sin(u + phase); };
    switch (style) {
        case 0: return {wave(7 * p.x, 0), wave(7 * p.y, 2.1), wave(7 * p.z, 4.2)};
        case 1: return {wave(5 * (p.x + p.y), 1.0), wave(5 * (p.y + p.z), 3.0),
                        wave(5 * (p.z + p.x), 5.0)};
        default: return {wave(9 * p.z, 0.5), wave(9 * p.x, 2.5), wave(9 * p.y, 4.5)};
    }
}

struct SurfaceSample {
    Vec3 position;
    Vec3 normal;
    Vec3 color;
};

struct CapsulePart {
    Vec3 p0, p1;
    double radius;
    Vec3 base_color;
    double area() const {
        double len = (p1 - p0).norm();
        return 2 * kPi * radius * len + 4 * kPi * radius * radius;
    }
};

Vec3 unit_sphere_point(Rng& rng) {
    double z = rng.uniform(-1.0, 1.0);
    double phi = rng.uniform(0.0, 2 * kPi);
    double rr = std::sqrt(std::max(0.0, 1 - z * z));
    return {rr * std::cos(phi), rr * std::sin(phi), z};
}

SurfaceSample sample_capsule(const CapsulePart& part, Rng& rng) {
    Vec3 axis = part.p1 - part.p0;
    double len = axis.norm();
    Vec3 n_axis = len > 0 ? axis / len : Vec3{0, 0, 1};
    double side = 2 * kPi * part.radius * len;
    double caps = 4 * kPi * part.radius * part.radius;
    SurfaceSample s;
    if (rng.uniform() * (side + caps) < side) {
        double h = rng.uniform();
        double phi = rng.uniform(0.0, 2 * kPi);
        // Tangent frame around the axis.
        Vec3 ref = std::abs(n_axis.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
        Vec3 t1 = n_axis.cross(ref).normalized();
        Vec3 t2 = n_axis.cross(t1);
        s.normal = t1 * std::cos(phi) + t2 * std::sin(phi);
        s.position = part.p0 + axis * h + s.normal * part.radius;
    } else {
        Vec3 u = unit_sphere_point(rng);
        const Vec3& center = u.dot(n_axis) >= 0 ? part.p1 : part.p0;
        s.normal = u;
        s.position = center + u * part.radius;
    }
    s.color = part.base_color;
    return s;
}

SurfaceSample sample_sphere_scene(Rng& rng) {
    SurfaceSample s;
    s.normal = unit_sphere_point(rng);
    s.position = s.normal * 0.5;
    s.color = smooth_texture(s.position, 0);
    return s;
}

const Vec3 kBoxHalf{0.35, 0.28, 0.5};

SurfaceSample sample_box_scene(Rng& rng) {
    double ax = kBoxHalf.y * kBoxHalf.z, ay = kBoxHalf.x * kBoxHalf.z,
           az = kBoxHalf.x * kBoxHalf.y;
    double total = 2 * (ax + ay + az);
    double pick = rng.uniform(0.0, total);
    int face;
    if (pick < 2 * ax)
        face = pick < ax ? 0 : 1;
    else if (pick < 2 * ax + 2 * ay)
        face = pick < 2 * ax + ay ? 2 : 3;
    else
        face = pick < 2 * ax + 2 * ay + az ? 4 : 5;

    double u = rng.uniform(-1.0, 1.0), v = rng.uniform(-1.0, 1.0);
    SurfaceSample s;
    switch (face) {
        case 0: s.position = {+kBoxHalf.x, u * kBoxHalf.y, v * kBoxHalf.z}; s.normal = {1, 0, 0}; break;
        case 1: s.position = {-kBoxHalf.x, u * kBoxHalf.y, v * kBoxHalf.z}; s.normal = {-1, 0, 0}; break;
        case 2: s.position = {u * kBoxHalf.x, +kBoxHalf.y, v * kBoxHalf.z}; s.normal = {0, 1, 0}; break;
        case 3: s.position = {u * kBoxHalf.x, -kBoxHalf.y, v * kBoxHalf.z}; s.normal = {0, -1, 0}; break;
        case 4: s.position = {u * kBoxHalf.x, v * kBoxHalf.y, +kBoxHalf.z}; s.normal = {0, 0, 1}; break;
        default: s.position = {u * kBoxHalf.x, v * kBoxHalf.y, -kBoxHalf.z}; s.normal = {0, 0, -1}; break;
    }
    s.color = smooth_texture(s.position, 1);
    return s;
}

std::vector<CapsulePart> person_parts() {
    Vec3 skin{0.87, 0.72, 0.60}, shirt{0.20, 0.35, 0.78}, pants{0.24, 0.24, 0.30};
    return {
        {{0, 0, -0.05}, {0, 0, 0.35}, 0.17, shirt},        // torso
        {{0, 0, 0.52}, {0, 0, 0.52}, 0.13, skin},          // head
        {{-0.09, 0, -0.72}, {-0.09, 0, -0.08}, 0.075, pants},
        {{0.09, 0, -0.72}, {0.09, 0, -0.08}, 0.075, pants},
        {{-0.26, 0, 0.05}, {-0.21, 0, 0.30}, 0.055, skin},
        {{0.26, 0, 0.05}, {0.21, 0, 0.30}, 0.055, skin},
    };
}

SurfaceSample sample_person_scene(Rng& rng) {
    static const std::vector<CapsulePart> parts = person_parts();
    double total = 0;
    for (const CapsulePart& p : parts) total += p.area();
    double pick = rng.uniform(0.0, total);
    size_t idx = 0;
    for (; idx + 1 < parts.size(); ++idx) {
        if (pick < parts[idx].area()) break;
        pick -= parts[idx].area();
    }
    SurfaceSample s = sample_capsule(parts[idx], rng);
    // Shirt stripes; skin and pants stay near their base tone.
    if (idx == 0) {
        double m = 0.8 + 0.2 * std::sin(22 * s.position.z);
        s.color = s.color * m;
    }
    return s;
}

double surface_area(SceneKind kind) {
    switch (kind) {
        case SceneKind::kSphere: return 4 * kPi * 0.25;
        case SceneKind::kBox:
            return 8 * (kBoxHalf.y * kBoxHalf.z + kBoxHalf.x * kBoxHalf.z +
                        kBoxHalf.x * kBoxHalf.y);
        default: {
            double a = 0;
            for (const CapsulePart& p : person_parts()) a += p.area();
            return a;
        }
    }
}

} // namespace

SceneKind scene_kind_from(const std::string& name) {
    if (name == "sphere") return SceneKind::kSphere;
    if (name == "box") return SceneKind::kBox;
    if (name == "capsule-person") return SceneKind::kCapsulePerson;
    throw Error("unknown scene kind '" + name + "'");
}

std::string scene_kind_name(SceneKind kind) {
    switch (kind) {
        case SceneKind::kSphere: return "sphere";
        case SceneKind::kBox: return "box";
        default: return "capsule-person";
    }
}

Camera orbit_camera(int index, int n_views, int image_size) {
    check(n_views >= 1 && image_size >= 8, "bad orbit camera request");
    double az = 2 * kPi * index / n_views;
    double el = 0.2;
    double radius = 2.6;
    Vec3 eye{radius * std::cos(el) * std::cos(az), radius * std::cos(el) * std::sin(az),
             radius * std::sin(el)};

    Vec3 forward = (Vec3{0, 0, 0} - eye).normalized();
    Vec3 up{0, 0, 1};
    Vec3 xc = forward.cross(up).normalized();
    Vec3 yc = forward.cross(xc); // y-down pinhole: v grows toward world-down

    Camera cam;
    cam.width = cam.height = image_size;
    cam.fx = cam.fy = 1.2 * image_size;
    cam.cx = image_size / 2.0;
    cam.cy = image_size / 2.0;
    for (int c = 0; c < 3; ++c) {
        cam.rotation(0, c) = xc[c];
        cam.rotation(1, c) = yc[c];
        cam.rotation(2, c) = forward[c];
    }
    cam.translation = cam.rotation * (Vec3{0, 0, 0} - eye);
    cam.validate();
    return cam;
}

SynthScene synth_scene(SceneKind kind, int count, std::uint64_t seed, int n_views,
                       int image_size) {
    check(count >= 1, "scene needs at least one gaussian");
    check(n_views >= 1, "scene needs at least one view");
    Rng rng(derive_seed(seed, "synth-" + scene_kind_name(kind)));

    double tangent = std::sqrt(surface_area(kind) / (kPi * count));
    SynthScene scene;
    scene.gaussians.gaussians.reserve(size_t(count));
    for (int i = 0; i < count; ++i) {
        SurfaceSample s;
        switch (kind) {
            case SceneKind::kSphere: s = sample_sphere_scene(rng); break;
            case SceneKind::kBox: s = sample_box_scene(rng); break;
            default: s = sample_person_scene(rng); break;
        }
        GaussianAttributes g;
        g.position = s.position;
        g.color = s.color;
        double st = tangent * (0.85 + 0.3 * rng.uniform());
        g.log_scale = {std::log(st), std::log(st), std::log(st * 0.25)};
        g.rotation = z_to(s.normal);
        g.opacity_logit = logit(0.9) + 0.3 * rng.normal();
        scene.gaussians.gaussians.push_back(g);
    }

    switch (kind) {
        case SceneKind::kSphere: scene.proxy = uv_sphere_mesh({0, 0, 0}, 0.5, 16, 12); break;
        case SceneKind::kBox: scene.proxy = box_mesh(kBoxHalf, 4); break;
        default: scene.proxy = capsule_person_mesh(); break;
    }

    scene.views.reserve(size_t(n_views));
    for (int v = 0; v < n_views; ++v) {
        SynthView view;
        view.camera = orbit_camera(v, n_views, image_size);
        RenderResult rr = render_gaussians(scene.gaussians, view.camera);
        view.image = std::move(rr.color);
        view.depth = std::move(rr.depth);
        scene.views.push_back(std::move(view));
    }
    return scene;
}

SmplMesh uv_sphere_mesh(const Vec3& center, double radius, int segments, int rings) {
    check(segments >= 3 && rings >= 3, "sphere mesh too coarse");
    SmplMesh mesh;
    mesh.vertices.push_back(center + Vec3{0, 0, radius});
    for (int r = 1; r < rings; ++r) {
        double theta = kPi * r / rings;
        for (int s = 0; s < segments; ++s) {
            double phi = 2 * kPi * s / segments;
            mesh.vertices.push_back(center + Vec3{radius * std::sin(theta) * std::cos(phi),
                                                  radius * std::sin(theta) * std::sin(phi),
                                                  radius * std::cos(theta)});
        }
    }
    mesh.vertices.push_back(center + Vec3{0, 0, -radius});
    int bottom = int(mesh.vertices.size()) - 1;

    auto ring_vert = [&](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };
    for (int s = 0; s < segments; ++s)
        mesh.faces.push_back({0, ring_vert(1, s), ring_vert(1, s + 1)});
    for (int r = 1; r < rings - 1; ++r)
        for (int s = 0; s < segments; ++s) {
            int a = ring_vert(r, s), b = ring_vert(r, s + 1);
            int c = ring_vert(r + 1, s), d = ring_vert(r + 1, s + 1);
            mesh.faces.push_back({a, c, d});
            mesh.faces.push_back({a, d, b});
        }
    for (int s = 0; s < segments; ++s)
        mesh.faces.push_back({bottom, ring_vert(rings - 1, s + 1), ring_vert(rings - 1, s)});

    mesh.vertex_colors.assign(mesh.vertices.size(), Vec3{0, 0, 0});
    mesh.visible.assign(mesh.vertices.size(), 0);
    mesh.validate();
    return mesh;
}

SmplMesh box_mesh(const Vec3& half_extent, int subdiv) {
    check(subdiv >= 1, "box mesh needs subdivision >= 1");
    SmplMesh mesh;
    // axis: the fixed dimension; sign: its side. u, v are the other two axes.
    for (int axis = 0; axis < 3; ++axis)
        for (int sign = -1; sign <= 1; sign += 2) {
            int ua = (axis + 1) % 3, va = (axis + 2) % 3;
            int base = int(mesh.vertices.size());
            for (int i = 0; i <= subdiv; ++i)
                for (int j = 0; j <= subdiv; ++j) {
                    Vec3 p;
                    p[axis] = sign * half_extent[axis];
                    p[ua] = (-1.0 + 2.0 * i / subdiv) * half_extent[ua];
                    p[va] = (-1.0 + 2.0 * j / subdiv) * half_extent[va];
                    mesh.vertices.push_back(p);
                }
            auto vid = [&](int i, int j) { return base + i * (subdiv + 1) + j; };
            for (int i = 0; i < subdiv; ++i)
                for (int j = 0; j < subdiv; ++j) {
                    int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1),
                        d = vid(i, j + 1);
                    if (sign > 0) {
                        mesh.faces.push_back({a, b, c});
                        mesh.faces.push_back({a, c, d});
                    } else {
                        mesh.faces.push_back({a, c, b});
                        mesh.faces.push_back({a, d, c});
                    }
                }
        }
    mesh.vertex_colors.assign(mesh.vertices.size(), Vec3{0, 0, 0});
    mesh.visible.assign(mesh.vertices.size(), 0);
    mesh.validate();
    return mesh;
}

namespace {

void merge_into(SmplMesh& dst, const SmplMesh& src) {
    int base = int(dst.vertices.size());
    dst.vertices.insert(dst.vertices.end(), src.vertices.begin(), src.vertices.end());
    for (const auto& f : src.faces)
        dst.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
}

SmplMesh capsule_mesh(const Vec3& p0, const Vec3& p1, double radius, int segments,
                      int rings) {
    SmplMesh unit = uv_sphere_mesh({0, 0, 0}, 1.0, segments, rings);
    Vec3 axis = p1 - p0;
    double len = axis.norm();
    Vec3 n = len > 0 ? axis / len : Vec3{0, 0, 1};
    Mat3 rot = z_to(n).to_matrix();
    Vec3 mid = (p0 + p1) * 0.5;
    for (Vec3& v : unit.vertices) {
        Vec3 shifted = rot * (v * radius) + mid + n * (v.z >= 0 ? len * 0.5 : -len * 0.5);
        v = shifted;
    }
    return unit;
}

} // namespace

SmplMesh capsule_person_mesh() {
    SmplMesh mesh;
    for (const CapsulePart& p : person_parts())
        merge_into(mesh, capsule_mesh(p.p0, p.p1, p.radius, 12, 8));
    mesh.vertex_colors.assign(mesh.vertices.size(), Vec3{0, 0, 0});
    mesh.visible.assign(mesh.vertices.size(), 0);
    mesh.validate();
    return mesh;
}

} // namespace jga
