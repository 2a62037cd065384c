#include "jga/render/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace jga {

namespace {

Mat3 diag(const Vec3& d) {
    Mat3 m;
    m.m = {d.x, 0, 0, 0, d.y, 0, 0, 0, d.z};
    return m;
}

// d R(q_hat) / d q_hat for each unit-quaternion component.
void rotation_quat_derivs(const Quat& q, Mat3 out[4]) {
    double w = q.w, x = q.x, y = q.y, z = q.z;
    out[0].m = {0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0};
    out[1].m = {0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x};
    out[2].m = {-4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y};
    out[3].m = {-4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0};
}

} // namespace

Rasterizer::Rasterizer(const Camera& camera, const RasterConfig& cfg)
    : cam_(camera), cfg_(cfg) {
    cam_.validate();
}

const Image& Rasterizer::forward(const GaussianSet& set) {
    set_ = &set;
    const int W = cam_.width, H = cam_.height;
    color_ = Image(W, H, 3);
    depth_ = DepthMap(W, H, 0.0);
    proj_.clear();
    frags_.assign(static_cast<std::size_t>(W) * H, {});
    final_t_.assign(static_cast<std::size_t>(W) * H, 1.0);

    // Project every gaussian.
    proj_.reserve(set.size());
    for (std::size_t gi = 0; gi < set.size(); ++gi) {
        const GaussianAttributes& g = set.gaussians[gi];
        Projected p;
        p.gauss = gi;
        p.t = cam_.to_camera(g.position);
        if (p.t.z <= cfg_.near_clip) continue;

        p.rot = g.rotation.normalized().to_matrix();
        p.scale = g.scale();
        Mat3 m = p.rot * diag(p.scale);
        Mat3 sigma_world = m * m.transposed();
        p.sigma_cam = cam_.rotation * sigma_world * cam_.rotation.transposed();

        double iz = 1.0 / p.t.z;
        p.u = cam_.fx * p.t.x * iz + cam_.cx;
        p.v = cam_.fy * p.t.y * iz + cam_.cy;
        p.j00 = cam_.fx * iz;
        p.j02 = -cam_.fx * p.t.x * iz * iz;
        p.j11 = cam_.fy * iz;
        p.j12 = -cam_.fy * p.t.y * iz * iz;

        // Screen covariance J Sigma_cam J^T plus the blur floor.
        const Mat3& S = p.sigma_cam;
        double r0x = p.j00 * S(0, 0) + p.j02 * S(2, 0);
        double r0y = p.j00 * S(0, 1) + p.j02 * S(2, 1);
        double r0z = p.j00 * S(0, 2) + p.j02 * S(2, 2);
        double r1x = p.j11 * S(1, 0) + p.j12 * S(2, 0);
        double r1y = p.j11 * S(1, 1) + p.j12 * S(2, 1);
        double r1z = p.j11 * S(1, 2) + p.j12 * S(2, 2);
        p.s00 = r0x * p.j00 + r0z * p.j02 + cfg_.blur;
        p.s01 = r0y * p.j11 + r0z * p.j12;
        p.s11 = r1y * p.j11 + r1z * p.j12 + cfg_.blur;

        double det = p.s00 * p.s11 - p.s01 * p.s01;
        if (det <= 1e-12) continue;
        p.a00 = p.s11 / det;
        p.a01 = -p.s01 / det;
        p.a11 = p.s00 / det;

        double mid = 0.5 * (p.s00 + p.s11);
        double eig_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
        double radius = cfg_.sigma_cutoff * std::sqrt(eig_max);
        p.x0 = std::max(0, static_cast<int>(std::floor(p.u - radius)));
        p.x1 = std::min(W, static_cast<int>(std::ceil(p.u + radius)) + 1);
        p.y0 = std::max(0, static_cast<int>(std::floor(p.v - radius)));
        p.y1 = std::min(H, static_cast<int>(std::ceil(p.v + radius)) + 1);
        if (p.x0 >= p.x1 || p.y0 >= p.y1) continue;

        p.opacity = g.opacity();
        p.color = g.color;
        p.valid = true;
        proj_.push_back(p);
    }

    // Depth order, with world position breaking ties so the composite is
    // independent of input permutation.
    std::vector<std::size_t> order(proj_.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (proj_[a].t.z != proj_[b].t.z) return proj_[a].t.z < proj_[b].t.z;
        const Vec3& pa = set.gaussians[proj_[a].gauss].position;
        const Vec3& pb = set.gaussians[proj_[b].gauss].position;
        if (pa.x != pb.x) return pa.x < pb.x;
        if (pa.y != pb.y) return pa.y < pb.y;
        return pa.z < pb.z;
    });

    // Bin fragments per pixel in depth order.
    for (std::size_t oi : order) {
        const Projected& p = proj_[oi];
        for (int py = p.y0; py < p.y1; ++py)
            for (int px = p.x0; px < p.x1; ++px) {
                double dx = px + 0.5 - p.u;
                double dy = py + 0.5 - p.v;
                double q = p.a00 * dx * dx + 2.0 * p.a01 * dx * dy + p.a11 * dy * dy;
                if (q > cfg_.sigma_cutoff * cfg_.sigma_cutoff) continue;
                double gv = std::exp(-0.5 * q);
                double alpha = std::min(p.opacity * gv, 0.999);
                frags_[static_cast<std::size_t>(py) * W + px].push_back(
                    {static_cast<std::int32_t>(oi), alpha, gv, dx, dy});
            }
    }

    // Composite front to back.
    for (int py = 0; py < H; ++py)
        for (int px = 0; px < W; ++px) {
            std::size_t pix = static_cast<std::size_t>(py) * W + px;
            auto& fl = frags_[pix];
            double T = 1.0;
            Vec3 c{0, 0, 0};
            double dsum = 0, wsum = 0;
            std::size_t used = 0;
            for (const Fragment& f : fl) {
                if (T < cfg_.transmittance_min) break;
                const Projected& p = proj_[static_cast<std::size_t>(f.proj)];
                double w = f.alpha * T;
                c += p.color * w;
                dsum += p.t.z * w;
                wsum += w;
                T *= 1.0 - f.alpha;
                ++used;
            }
            fl.resize(used); // drop fragments past early termination
            c += cfg_.background * T;
            final_t_[pix] = T;
            color_.at(px, py, 0) = c.x;
            color_.at(px, py, 1) = c.y;
            color_.at(px, py, 2) = c.z;
            depth_.at(px, py) = wsum > 1e-12 ? dsum / wsum : 0.0;
        }
    return color_;
}

std::vector<GaussianGrad> Rasterizer::backward(const Image& dloss_dcolor) const {
    check(set_ != nullptr, "backward before forward");
    check(dloss_dcolor.width == cam_.width && dloss_dcolor.height == cam_.height,
          "gradient image size mismatch");
    const int W = cam_.width, H = cam_.height;

    // Per-projected accumulators in screen space.
    struct Accum {
        Vec3 dcolor;
        double dlogit = 0;
        double du = 0, dv = 0;
        double da00 = 0, da01 = 0, da10 = 0, da11 = 0;
    };
    std::vector<Accum> acc(proj_.size());

    for (int py = 0; py < H; ++py)
        for (int px = 0; px < W; ++px) {
            std::size_t pix = static_cast<std::size_t>(py) * W + px;
            const auto& fl = frags_[pix];
            if (fl.empty()) continue;
            Vec3 dG{dloss_dcolor.at(px, py, 0), dloss_dcolor.at(px, py, 1),
                    dloss_dcolor.at(px, py, 2)};
            // Suffix color (everything behind the current fragment).
            Vec3 suffix = cfg_.background * final_t_[pix];
            double T = final_t_[pix];
            for (auto it = fl.rbegin(); it != fl.rend(); ++it) {
                const Fragment& f = *it;
                const Projected& p = proj_[static_cast<std::size_t>(f.proj)];
                Accum& a = acc[static_cast<std::size_t>(f.proj)];
                double ti = T / (1.0 - f.alpha); // transmittance before this fragment
                double w = f.alpha * ti;
                a.dcolor += dG * w;
                double dalpha = dG.dot(p.color * ti - suffix / (1.0 - f.alpha));
                if (p.opacity * f.gauss_val < 0.999) {
                    // alpha = opacity * G
                    double dop = dalpha * f.gauss_val;
                    a.dlogit += dop * p.opacity * (1.0 - p.opacity);
                    double dgv = dalpha * p.opacity * f.gauss_val;
                    // dG/dmu = G * A d; dG/dA = -G/2 * d d^T
                    double adx = p.a00 * f.dx + p.a01 * f.dy;
                    double ady = p.a01 * f.dx + p.a11 * f.dy;
                    a.du += dgv * adx;
                    a.dv += dgv * ady;
                    a.da00 += -0.5 * dgv * f.dx * f.dx;
                    a.da01 += -0.5 * dgv * f.dx * f.dy;
                    a.da10 += -0.5 * dgv * f.dy * f.dx;
                    a.da11 += -0.5 * dgv * f.dy * f.dy;
                }
                suffix += p.color * w;
                T = ti;
            }
        }

    std::vector<GaussianGrad> grads(set_->size());
    for (std::size_t oi = 0; oi < proj_.size(); ++oi) {
        const Projected& p = proj_[oi];
        const Accum& a = acc[oi];
        GaussianGrad& g = grads[p.gauss];
        g.color += a.dcolor;
        g.opacity_logit += a.dlogit;

        // dSigma' = -A dA A (2x2).
        double m00 = a.da00 * p.a00 + a.da01 * p.a01;
        double m01 = a.da00 * p.a01 + a.da01 * p.a11;
        double m10 = a.da10 * p.a00 + a.da11 * p.a01;
        double m11 = a.da10 * p.a01 + a.da11 * p.a11;
        double ds00 = -(p.a00 * m00 + p.a01 * m10);
        double ds01 = -(p.a00 * m01 + p.a01 * m11);
        double ds10 = -(p.a01 * m00 + p.a11 * m10);
        double ds11 = -(p.a01 * m01 + p.a11 * m11);

        // Sigma' = J Sigma_cam J^T: gradient w.r.t. Sigma_cam and J.
        // J rows: (j00, 0, j02), (0, j11, j12).
        const Mat3& S = p.sigma_cam;
        Mat3 dscam;
        double jr[2][3] = {{p.j00, 0, p.j02}, {0, p.j11, p.j12}};
        double dsp[2][2] = {{ds00, ds01}, {ds10, ds11}};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0;
                for (int r = 0; r < 2; ++r)
                    for (int c = 0; c < 2; ++c) s += jr[r][i] * dsp[r][c] * jr[c][j];
                dscam(i, j) = s;
            }
        // dJ = (dSigma' + dSigma'^T) J Sigma_cam.
        double sym[2][2] = {{2 * ds00, ds01 + ds10}, {ds01 + ds10, 2 * ds11}};
        double js[2][3];
        for (int r = 0; r < 2; ++r)
            for (int j = 0; j < 3; ++j) {
                double s = 0;
                for (int k = 0; k < 3; ++k) s += jr[r][k] * S(k, j);
                js[r][j] = s;
            }
        double dj[2][3];
        for (int r = 0; r < 2; ++r)
            for (int j = 0; j < 3; ++j)
                dj[r][j] = sym[r][0] * js[0][j] + sym[r][1] * js[1][j];

        // Camera-space position gradient via J entries and the mean.
        double iz = 1.0 / p.t.z, iz2 = iz * iz, iz3 = iz2 * iz;
        Vec3 dt;
        dt.x = a.du * cam_.fx * iz + dj[0][2] * (-cam_.fx * iz2);
        dt.y = a.dv * cam_.fy * iz + dj[1][2] * (-cam_.fy * iz2);
        dt.z = a.du * (-cam_.fx * p.t.x * iz2) + a.dv * (-cam_.fy * p.t.y * iz2) +
               dj[0][0] * (-cam_.fx * iz2) + dj[0][2] * (2 * cam_.fx * p.t.x * iz3) +
               dj[1][1] * (-cam_.fy * iz2) + dj[1][2] * (2 * cam_.fy * p.t.y * iz3);
        g.position += cam_.rotation.transposed() * dt;

        // Sigma_cam = W Sigma W^T.
        Mat3 dsigma = cam_.rotation.transposed() * dscam * cam_.rotation;
        // Sigma = M M^T with M = R diag(scale).
        Mat3 m = p.rot * diag(p.scale);
        Mat3 dsym = dsigma + dsigma.transposed();
        Mat3 dm = dsym * m;
        // dR = dM diag(s); dscale_k = sum_r dM(r,k) R(r,k).
        Mat3 drot;
        Vec3 dscale{0, 0, 0};
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                drot(r, c) = dm(r, c) * p.scale[c];
                dscale[c] += dm(r, c) * p.rot(r, c);
            }
        const GaussianAttributes& ga = set_->gaussians[p.gauss];
        Vec3 sc = p.scale;
        g.log_scale += Vec3{dscale.x * sc.x, dscale.y * sc.y, dscale.z * sc.z};

        // Chain through quaternion normalization.
        Quat qh = ga.rotation.normalized();
        Mat3 dq[4];
        rotation_quat_derivs(qh, dq);
        double dqh[4] = {0, 0, 0, 0};
        for (int k = 0; k < 4; ++k)
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) dqh[k] += drot(r, c) * dq[k](r, c);
        double qn = ga.rotation.norm();
        double qv[4] = {qh.w, qh.x, qh.y, qh.z};
        double dot = dqh[0] * qv[0] + dqh[1] * qv[1] + dqh[2] * qv[2] + dqh[3] * qv[3];
        g.rotation.w += (dqh[0] - dot * qv[0]) / qn;
        g.rotation.x += (dqh[1] - dot * qv[1]) / qn;
        g.rotation.y += (dqh[2] - dot * qv[2]) / qn;
        g.rotation.z += (dqh[3] - dot * qv[3]) / qn;
    }
    return grads;
}

RenderResult render_gaussians(const GaussianSet& set, const Camera& camera,
                              const RasterConfig& cfg) {
    Rasterizer r(camera, cfg);
    r.forward(set);
    return {r.color(), r.depth()};
}

} // namespace jga
