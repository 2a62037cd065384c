#include "jga/render/image_metrics.hpp"

#include <cmath>
#include <vector>

namespace jga {

double l1_loss(const Image& a, const Image& b) {
    check(a.size() == b.size() && a.size() > 0, "l1 image size mismatch");
    double s = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i)
        s += std::abs(a.pixels[i] - b.pixels[i]);
    return s / static_cast<double>(a.pixels.size());
}

Image l1_backward(const Image& a, const Image& b) {
    Image g(a.width, a.height, a.channels);
    double inv = 1.0 / static_cast<double>(a.pixels.size());
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        double d = a.pixels[i] - b.pixels[i];
        g.pixels[i] = d > 0 ? inv : (d < 0 ? -inv : 0.0);
    }
    return g;
}

namespace {

constexpr int kWin = 11;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::vector<double>& window_taps() {
    static const std::vector<double> taps = [] {
        std::vector<double> t(kWin);
        double sigma = 1.5, sum = 0;
        for (int i = 0; i < kWin; ++i) {
            double d = i - (kWin - 1) / 2.0;
            t[i] = std::exp(-d * d / (2 * sigma * sigma));
            sum += t[i];
        }
        for (double& v : t) v /= sum;
        return t;
    }();
    return taps;
}

// Valid separable correlation of a single-channel field.
std::vector<double> filter_valid(const std::vector<double>& in, int w, int h) {
    const auto& taps = window_taps();
    int ow = w - kWin + 1, oh = h - kWin + 1;
    std::vector<double> mid(static_cast<std::size_t>(ow) * h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int k = 0; k < kWin; ++k) s += taps[k] * in[static_cast<std::size_t>(y) * w + x + k];
            mid[static_cast<std::size_t>(y) * ow + x] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh, 0.0);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int k = 0; k < kWin; ++k) s += taps[k] * mid[static_cast<std::size_t>(y + k) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    return out;
}

// Adjoint of filter_valid: spreads output-sized gradients back over the
// input-sized field.
std::vector<double> filter_adjoint(const std::vector<double>& g, int w, int h) {
    const auto& taps = window_taps();
    int ow = w - kWin + 1, oh = h - kWin + 1;
    std::vector<double> mid(static_cast<std::size_t>(ow) * h, 0.0);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double v = g[static_cast<std::size_t>(y) * ow + x];
            for (int k = 0; k < kWin; ++k)
                mid[static_cast<std::size_t>(y + k) * ow + x] += taps[k] * v;
        }
    std::vector<double> out(static_cast<std::size_t>(w) * h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double v = mid[static_cast<std::size_t>(y) * ow + x];
            for (int k = 0; k < kWin; ++k)
                out[static_cast<std::size_t>(y) * w + x + k] += taps[k] * v;
        }
    return out;
}

std::vector<double> channel_plane(const Image& img, int c) {
    std::vector<double> p(static_cast<std::size_t>(img.width) * img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            p[static_cast<std::size_t>(y) * img.width + x] = img.at(x, y, c);
    return p;
}

} // namespace

double ssim(const Image& a, const Image& b) {
    check(a.width == b.width && a.height == b.height && a.channels == b.channels,
          "ssim image size mismatch");
    check(a.width >= kWin && a.height >= kWin, "ssim needs images at least 11x11");
    int w = a.width, h = a.height;
    std::size_t outn = static_cast<std::size_t>(w - kWin + 1) * (h - kWin + 1);

    double total = 0;
    for (int c = 0; c < a.channels; ++c) {
        auto x = channel_plane(a, c), y = channel_plane(b, c);
        std::vector<double> x2(x.size()), y2(x.size()), xy(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            x2[i] = x[i] * x[i];
            y2[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        auto mx = filter_valid(x, w, h), my = filter_valid(y, w, h);
        auto ex2 = filter_valid(x2, w, h), ey2 = filter_valid(y2, w, h);
        auto exy = filter_valid(xy, w, h);
        double s = 0;
        for (std::size_t i = 0; i < outn; ++i) {
            double vx = ex2[i] - mx[i] * mx[i];
            double vy = ey2[i] - my[i] * my[i];
            double cv = exy[i] - mx[i] * my[i];
            double a1 = 2 * mx[i] * my[i] + kC1, a2 = 2 * cv + kC2;
            double b1 = mx[i] * mx[i] + my[i] * my[i] + kC1, b2 = vx + vy + kC2;
            s += (a1 * a2) / (b1 * b2);
        }
        total += s / static_cast<double>(outn);
    }
    return total / a.channels;
}

Image ssim_backward(const Image& a, const Image& b) {
    int w = a.width, h = a.height;
    std::size_t outn = static_cast<std::size_t>(w - kWin + 1) * (h - kWin + 1);
    Image grad(w, h, a.channels);
    double scale = 1.0 / (static_cast<double>(outn) * a.channels);

    for (int c = 0; c < a.channels; ++c) {
        auto x = channel_plane(a, c), y = channel_plane(b, c);
        std::vector<double> x2(x.size()), y2(x.size()), xy(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            x2[i] = x[i] * x[i];
            y2[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        auto mx = filter_valid(x, w, h), my = filter_valid(y, w, h);
        auto ex2 = filter_valid(x2, w, h), ey2 = filter_valid(y2, w, h);
        auto exy = filter_valid(xy, w, h);

        // Partials w.r.t. the filtered statistics at each window.
        std::vector<double> gmx(outn), gex2(outn), gexy(outn);
        for (std::size_t i = 0; i < outn; ++i) {
            double vx = ex2[i] - mx[i] * mx[i];
            double vy = ey2[i] - my[i] * my[i];
            double cv = exy[i] - mx[i] * my[i];
            double a1 = 2 * mx[i] * my[i] + kC1, a2 = 2 * cv + kC2;
            double b1 = mx[i] * mx[i] + my[i] * my[i] + kC1, b2 = vx + vy + kC2;
            double s = (a1 * a2) / (b1 * b2);
            gexy[i] = scale * 2 * a1 / (b1 * b2);
            gex2[i] = scale * (-s / b2);
            gmx[i] = scale * (2 * my[i] * a2 / (b1 * b2) + (-2 * my[i]) * a1 / (b1 * b2) -
                              s / b1 * 2 * mx[i] + s / b2 * 2 * mx[i]);
        }
        auto amx = filter_adjoint(gmx, w, h);
        auto aex2 = filter_adjoint(gex2, w, h);
        auto aexy = filter_adjoint(gexy, w, h);
        for (int py = 0; py < h; ++py)
            for (int px = 0; px < w; ++px) {
                std::size_t i = static_cast<std::size_t>(py) * w + px;
                grad.at(px, py, c) = amx[i] + aex2[i] * 2 * x[i] + aexy[i] * y[i];
            }
    }
    return grad;
}

double psnr(const Image& a, const Image& b) {
    check(a.size() == b.size() && a.size() > 0, "psnr image size mismatch");
    double mse = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        double d = a.pixels[i] - b.pixels[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.pixels.size());
    if (mse <= 1e-10) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

} // namespace jga
