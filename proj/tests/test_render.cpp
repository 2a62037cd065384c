#include <doctest.h>

#include <cmath>
#include <vector>

#include "jga/nn/rng.hpp"
#include "jga/render/image_metrics.hpp"
#include "jga/render/rasterizer.hpp"

using namespace jga;

namespace {

// 16x16 camera looking down +z from the origin side; a point at the world
// origin lands exactly on the center of pixel (8,8) because cx = cy = 8.5
// coincides with that pixel's center sample.
Camera test_camera() {
    Camera cam;
    cam.width = 16;
    cam.height = 16;
    cam.fx = 24;
    cam.fy = 24;
    cam.cx = 8.5;
    cam.cy = 8.5;
    cam.rotation = Mat3::identity();
    cam.translation = {0, 0, 2.5};
    cam.validate();
    return cam;
}

GaussianAttributes make_gaussian(Vec3 pos, Vec3 color, double log_scale, double opacity_logit) {
    GaussianAttributes g;
    g.position = pos;
    g.color = color;
    g.log_scale = {log_scale, log_scale, log_scale};
    g.rotation = {1, 0, 0, 0};
    g.opacity_logit = opacity_logit;
    return g;
}

GaussianSet random_set(Rng& rng, std::size_t n) {
    GaussianSet set;
    for (std::size_t i = 0; i < n; ++i) {
        GaussianAttributes g;
        g.position = {rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.3, 0.3)};
        g.color = {rng.uniform(), rng.uniform(), rng.uniform()};
        g.log_scale = {rng.uniform(-2.5, -1.5), rng.uniform(-2.5, -1.5), rng.uniform(-2.5, -1.5)};
        g.rotation = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        g.opacity_logit = rng.uniform(-1.0, 2.0); // keep alpha well below the 0.999 cap
        set.gaussians.push_back(g);
    }
    return set;
}

Image random_image(Rng& rng, int w, int h) {
    Image img(w, h, 3);
    for (double& p : img.pixels) p = rng.uniform();
    return img;
}

double weighted_sum(const Image& img, const Image& weights) {
    double s = 0;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) s += img.pixels[i] * weights.pixels[i];
    return s;
}

// Pointers to the scalar fields of one gaussian, for generic FD sweeps.
std::vector<double*> attribute_slots(GaussianAttributes& g) {
    return {&g.position.x,  &g.position.y,  &g.position.z,  &g.color.x,   &g.color.y,
            &g.color.z,     &g.log_scale.x, &g.log_scale.y, &g.log_scale.z,
            &g.rotation.w,  &g.rotation.x,  &g.rotation.y,  &g.rotation.z,
            &g.opacity_logit};
}

std::vector<double> grad_slots(const GaussianGrad& g) {
    return {g.position.x,  g.position.y,  g.position.z,  g.color.x,   g.color.y,
            g.color.z,     g.log_scale.x, g.log_scale.y, g.log_scale.z,
            g.rotation.w,  g.rotation.x,  g.rotation.y,  g.rotation.z,
            g.opacity_logit};
}

// The same 1D window the metrics use, rebuilt from its documented definition.
std::vector<double> oracle_taps() {
    std::vector<double> w(11);
    double sum = 0;
    for (int i = 0; i < 11; ++i) {
        double d = i - 5;
        w[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

// Direct 2D-window SSIM, no separable filtering: every valid window is
// scanned explicitly. Slow but independent of the production code path.
double oracle_ssim(const Image& a, const Image& b) {
    auto taps = oracle_taps();
    int ow = a.width - 10, oh = a.height - 10;
    double total = 0;
    for (int c = 0; c < a.channels; ++c) {
        double s = 0;
        for (int wy = 0; wy < oh; ++wy)
            for (int wx = 0; wx < ow; ++wx) {
                double mx = 0, my = 0, ex2 = 0, ey2 = 0, exy = 0;
                for (int ky = 0; ky < 11; ++ky)
                    for (int kx = 0; kx < 11; ++kx) {
                        double t = taps[kx] * taps[ky];
                        double x = a.at(wx + kx, wy + ky, c);
                        double y = b.at(wx + kx, wy + ky, c);
                        mx += t * x;
                        my += t * y;
                        ex2 += t * x * x;
                        ey2 += t * y * y;
                        exy += t * x * y;
                    }
                double vx = ex2 - mx * mx, vy = ey2 - my * my, cv = exy - mx * my;
                double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
                s += (2 * mx * my + c1) * (2 * cv + c2) /
                     ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
        total += s / (static_cast<double>(ow) * oh);
    }
    return total / a.channels;
}

} // namespace

TEST_CASE("empty scene renders the background with zero depth") {
    Camera cam = test_camera();
    RasterConfig cfg;
    cfg.background = {0.25, 0.5, 0.75};
    auto res = render_gaussians(GaussianSet{}, cam, cfg);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            CHECK(res.color.at(x, y, 0) == 0.25);
            CHECK(res.color.at(x, y, 1) == 0.5);
            CHECK(res.color.at(x, y, 2) == 0.75);
            CHECK(res.depth.at(x, y) == 0.0);
        }
}

TEST_CASE("gaussians behind the camera are culled") {
    Camera cam = test_camera();
    GaussianSet set;
    set.gaussians.push_back(make_gaussian({0, 0, -5}, {1, 0, 0}, -1.0, 5.0));
    auto res = render_gaussians(set, cam);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) CHECK(res.color.at(x, y, 0) == 1.0);
}

TEST_CASE("a saturated gaussian writes its color at the center pixel") {
    // Projected mean hits pixel (8,8) dead center, so the gaussian value is
    // exactly 1 there and alpha saturates at the 0.999 cap.
    Camera cam = test_camera();
    GaussianSet set;
    Vec3 col{0.2, 0.6, 0.4};
    set.gaussians.push_back(make_gaussian({0, 0, 0}, col, -1.5, 12.0));
    Rasterizer raster(cam, RasterConfig{});
    raster.forward(set);

    for (int c = 0; c < 3; ++c) {
        double want = 0.999 * (c == 0 ? col.x : c == 1 ? col.y : col.z) + 0.001 * 1.0;
        CHECK(raster.color().at(8, 8, c) == doctest::Approx(want).epsilon(1e-12));
    }
    // Single fragment: the alpha-weighted depth is the camera-space z itself.
    CHECK(raster.depth().at(8, 8) == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("two overlapping gaussians composite exactly as the per-layer alphas predict") {
    Camera cam = test_camera();
    RasterConfig cfg; // white background
    // Red channel of both colors is zero so a single-gaussian render exposes
    // its per-pixel alpha against the white background: red = 1 - alpha.
    GaussianAttributes front = make_gaussian({-0.02, 0.01, -0.2}, {0, 0.8, 0.3}, -1.4, 1.0);
    GaussianAttributes back = make_gaussian({0.03, -0.02, 0.2}, {0, 0.2, 0.9}, -1.2, 1.5);

    GaussianSet only_front, only_back, both;
    only_front.gaussians = {front};
    only_back.gaussians = {back};
    both.gaussians = {back, front}; // deliberately out of depth order

    auto rf = render_gaussians(only_front, cam, cfg);
    auto rb = render_gaussians(only_back, cam, cfg);
    auto rboth = render_gaussians(both, cam, cfg);

    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            double a1 = 1.0 - rf.color.at(x, y, 0);
            double a2 = 1.0 - rb.color.at(x, y, 0);
            double t1 = 1.0 - a1;
            for (int c = 0; c < 3; ++c) {
                double c1 = c == 0 ? 0.0 : (c == 1 ? front.color.y : front.color.z);
                double c2 = c == 0 ? 0.0 : (c == 1 ? back.color.y : back.color.z);
                double want = a1 * c1 + t1 * a2 * c2 + t1 * (1.0 - a2) * 1.0;
                CHECK(rboth.color.at(x, y, c) == doctest::Approx(want).epsilon(1e-12));
            }
        }
}

TEST_CASE("rendering is invariant to gaussian order") {
    Camera cam = test_camera();
    Rng rng(41);
    GaussianSet a = random_set(rng, 7);
    GaussianSet b;
    for (std::size_t i = 0; i < a.size(); ++i) b.gaussians.push_back(a.gaussians[(i + 3) % 7]);

    auto ra = render_gaussians(a, cam);
    auto rb = render_gaussians(b, cam);
    CHECK(ra.color.pixels == rb.color.pixels);
    CHECK(ra.depth.depth == rb.depth.depth);
}

TEST_CASE("backward gradients match finite differences for every attribute") {
    Camera cam = test_camera();
    RasterConfig cfg;
    cfg.transmittance_min = 0; // the early-out is a step; disable it for FD
    Rng rng(42);
    GaussianSet set = random_set(rng, 2);
    Image dl = random_image(rng, 16, 16);

    Rasterizer raster(cam, cfg);
    raster.forward(set);
    auto grads = raster.backward(dl);
    REQUIRE(grads.size() == 2);

    double eps = 1e-5;
    int checked = 0;
    for (std::size_t gi = 0; gi < set.size(); ++gi) {
        auto slots = attribute_slots(set.gaussians[gi]);
        auto analytic = grad_slots(grads[gi]);
        for (std::size_t si = 0; si < slots.size(); ++si) {
            double saved = *slots[si];
            *slots[si] = saved + eps;
            double lp = weighted_sum(render_gaussians(set, cam, cfg).color, dl);
            *slots[si] = saved - eps;
            double lm = weighted_sum(render_gaussians(set, cam, cfg).color, dl);
            *slots[si] = saved;
            double fd = (lp - lm) / (2 * eps);
            double tol = 1e-4 * std::max({std::abs(fd), std::abs(analytic[si]), 1e-3});
            CHECK(std::abs(fd - analytic[si]) <= tol);
            ++checked;
        }
    }
    CHECK(checked == 28);
}

TEST_CASE("zero loss gradient produces zero attribute gradients") {
    Camera cam = test_camera();
    Rng rng(43);
    GaussianSet set = random_set(rng, 3);
    Rasterizer raster(cam, RasterConfig{});
    raster.forward(set);
    auto grads = raster.backward(Image(16, 16, 3, 0.0));
    for (const auto& g : grads)
        for (double v : grad_slots(g)) CHECK(v == 0.0);
}

TEST_CASE("culled gaussians get zero gradients") {
    Camera cam = test_camera();
    GaussianSet set;
    set.gaussians.push_back(make_gaussian({0, 0, 0}, {0.5, 0.5, 0.5}, -1.5, 1.0));
    set.gaussians.push_back(make_gaussian({0, 0, -5}, {1, 0, 0}, -1.0, 5.0)); // behind camera
    Rasterizer raster(cam, RasterConfig{});
    raster.forward(set);
    Rng rng(44);
    auto grads = raster.backward(random_image(rng, 16, 16));
    for (double v : grad_slots(grads[1])) CHECK(v == 0.0);
    double moved = 0;
    for (double v : grad_slots(grads[0])) moved += std::abs(v);
    CHECK(moved > 0);
}

TEST_CASE("l1 loss matches a hand computation and its gradient is the scaled sign") {
    Image a(12, 12, 3), b(12, 12, 3);
    Rng rng(45);
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        a.pixels[i] = rng.uniform();
        b.pixels[i] = rng.uniform();
    }
    double want = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) want += std::abs(a.pixels[i] - b.pixels[i]);
    want /= static_cast<double>(a.pixels.size());
    CHECK(l1_loss(a, b) == doctest::Approx(want).epsilon(1e-12));
    CHECK(l1_loss(a, a) == 0.0);

    Image g = l1_backward(a, b);
    double n = static_cast<double>(a.pixels.size());
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        double s = a.pixels[i] > b.pixels[i] ? 1.0 : (a.pixels[i] < b.pixels[i] ? -1.0 : 0.0);
        CHECK(g.pixels[i] == doctest::Approx(s / n).epsilon(1e-12));
    }
}

TEST_CASE("ssim of an image with itself is one") {
    Rng rng(46);
    Image a = random_image(rng, 15, 13);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ssim of constant images matches the closed form") {
    // Zero variance collapses the structural term, leaving the luminance
    // ratio (2*m1*m2 + C1) / (m1^2 + m2^2 + C1).
    double m1 = 0.3, m2 = 0.7, c1 = 1e-4;
    Image a(14, 14, 3, m1), b(14, 14, 3, m2);
    double want = (2 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1);
    CHECK(ssim(a, b) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("ssim agrees with a direct windowed reimplementation") {
    Rng rng(47);
    for (int trial = 0; trial < 3; ++trial) {
        Image a = random_image(rng, 16, 14);
        Image b = random_image(rng, 16, 14);
        // Correlate b with a so covariance terms are exercised too.
        for (std::size_t i = 0; i < b.pixels.size(); ++i)
            b.pixels[i] = 0.5 * b.pixels[i] + 0.5 * a.pixels[i];
        CHECK(ssim(a, b) == doctest::Approx(oracle_ssim(a, b)).epsilon(1e-8));
    }
}

TEST_CASE("ssim backward matches finite differences") {
    Rng rng(48);
    Image a = random_image(rng, 13, 12);
    Image b = random_image(rng, 13, 12);
    Image g = ssim_backward(a, b);
    double eps = 1e-6;
    for (std::size_t i = 0; i < a.pixels.size(); i += 7) { // strided sweep keeps it quick
        double saved = a.pixels[i];
        a.pixels[i] = saved + eps;
        double sp = ssim(a, b);
        a.pixels[i] = saved - eps;
        double sm = ssim(a, b);
        a.pixels[i] = saved;
        double fd = (sp - sm) / (2 * eps);
        CHECK(g.pixels[i] == doctest::Approx(fd).epsilon(2e-4));
    }
}

TEST_CASE("psnr caps at 100 for identical images and hits 20 dB for a 0.1 offset") {
    Image a(8, 8, 3, 0.4);
    CHECK(psnr(a, a) == 100.0);
    Image b(8, 8, 3, 0.5);
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("rendered loss decreases under a gradient step on colors") {
    // End-to-end sanity: nudging colors along the negative gradient of an L2
    // match to a target must reduce the loss.
    Camera cam = test_camera();
    RasterConfig cfg;
    cfg.transmittance_min = 0;
    Rng rng(49);
    GaussianSet set = random_set(rng, 4);
    Image target = random_image(rng, 16, 16);

    Rasterizer raster(cam, cfg);
    const Image& out = raster.forward(set);
    double before = 0;
    Image dl(16, 16, 3);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        double d = out.pixels[i] - target.pixels[i];
        before += d * d;
        dl.pixels[i] = 2 * d;
    }
    auto grads = raster.backward(dl);
    double lr = 0.01;
    for (std::size_t i = 0; i < set.size(); ++i) {
        set.gaussians[i].color.x -= lr * grads[i].color.x;
        set.gaussians[i].color.y -= lr * grads[i].color.y;
        set.gaussians[i].color.z -= lr * grads[i].color.z;
    }
    auto res = render_gaussians(set, cam, cfg);
    double after = 0;
    for (std::size_t i = 0; i < res.color.pixels.size(); ++i) {
        double d = res.color.pixels[i] - target.pixels[i];
        after += d * d;
    }
    CHECK(after < before);
}
