#pragma once

#include "jga/core/types.hpp"
#include "jga/core/voxel.hpp"

namespace jga {

struct RasterConfig {
    Vec3 background{1, 1, 1};
    double near_clip = 0.01;
    // Rays stop compositing once transmittance falls below this; set to 0
    // for gradient checks, where the cutoff would register as noise.
    double transmittance_min = 1e-4;
    double sigma_cutoff = 7.0; // bounding-box radius in screen-space sigmas
    double blur = 0.3;         // isotropic screen-space covariance floor
};

// CPU splatting of 3D gaussians: EWA projection of each covariance to screen
// space, front-to-back alpha compositing in camera-depth order, analytic
// gradients for every gaussian attribute. Depth output is the alpha-weighted
// mean camera depth (zero where nothing lands).
class Rasterizer {
public:
    Rasterizer(const Camera& camera, const RasterConfig& cfg);

    const Image& forward(const GaussianSet& set);
    const Image& color() const { return color_; }
    const DepthMap& depth() const { return depth_; }

    // dloss_dcolor must match the rendered image; returns one gradient per
    // input gaussian (zeros for culled ones).
    std::vector<GaussianGrad> backward(const Image& dloss_dcolor) const;

private:
    struct Projected {
        bool valid = false;
        std::size_t gauss = 0;  // index into the input set
        Vec3 t;                 // camera-space position
        double u = 0, v = 0;    // screen-space mean
        double s00 = 0, s01 = 0, s11 = 0; // screen covariance
        double a00 = 0, a01 = 0, a11 = 0; // its inverse
        double opacity = 0;
        Vec3 color;
        Mat3 rot;               // normalized-quaternion rotation
        Vec3 scale;
        Mat3 sigma_cam;
        double j00 = 0, j02 = 0, j11 = 0, j12 = 0; // projection jacobian
        int x0 = 0, x1 = 0, y0 = 0, y1 = 0;        // pixel bounds, half-open
    };
    struct Fragment {
        std::int32_t proj;
        double alpha;
        double gauss_val;
        double dx, dy;
    };

    Camera cam_;
    RasterConfig cfg_;
    const GaussianSet* set_ = nullptr;
    Image color_;
    DepthMap depth_;
    std::vector<Projected> proj_;
    std::vector<std::vector<Fragment>> frags_; // per pixel, front to back
    std::vector<double> final_t_;              // per-pixel end transmittance
};

// Forward-only convenience wrapper.
struct RenderResult {
    Image color;
    DepthMap depth;
};
RenderResult render_gaussians(const GaussianSet& set, const Camera& camera,
                              const RasterConfig& cfg = {});

} // namespace jga
