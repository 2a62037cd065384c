#include "jga/vae/losses.hpp"

#include <cmath>

#include "jga/render/image_metrics.hpp"

namespace jga {

namespace {
// Stable BCE with logits: max(l,0) - l*y + log(1+exp(-|l|)).
double bce_logit(double l, double y) {
    return std::max(l, 0.0) - l * y + std::log1p(std::exp(-std::abs(l)));
}
} // namespace

OccupancyLoss occupancy_loss(const DecodeResult& dec, const SparseVoxelTensor& gt) {
    OccupancyLoss out;
    for (const DecodeStage& stage : dec.stages) {
        std::vector<double> dl(stage.logits.size(), 0.0);
        if (!stage.logits.empty()) {
            auto keys = coord_keys_at(gt, stage.pre_prune.resolution());
            double inv = 1.0 / static_cast<double>(stage.logits.size());
            double s = 0;
            for (std::size_t i = 0; i < stage.logits.size(); ++i) {
                double y = keys.count(coord_key(stage.pre_prune.coord(i))) ? 1.0 : 0.0;
                s += bce_logit(stage.logits[i], y);
                dl[i] = (sigmoid(stage.logits[i]) - y) * inv;
            }
            out.value += s * inv;
        }
        out.dlogits.push_back(std::move(dl));
    }
    return out;
}

AttrLoss attr_loss(const SparseVoxelTensor& pred, const SparseVoxelTensor& gt) {
    check(pred.resolution() == gt.resolution(), "attr loss resolution mismatch");
    check(pred.channels() == gt.channels(), "attr loss channel mismatch");
    AttrLoss out;
    out.dpred = SparseVoxelTensor::aligned(pred, pred.channels());

    std::size_t isect = 0;
    const int C = pred.channels();
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (gt.find(pred.coord(i)) >= 0) ++isect;
    if (isect == 0) {
        out.empty_intersection = true;
        return out;
    }

    double inv = 1.0 / (static_cast<double>(isect) * C);
    double s = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        std::int64_t j = gt.find(pred.coord(i));
        if (j < 0) continue;
        const double* a = pred.feature(i);
        const double* b = gt.feature(static_cast<std::size_t>(j));
        double* g = out.dpred.feature(i);
        for (int c = 0; c < C; ++c) {
            double d = a[c] - b[c];
            s += d * d;
            g[c] = 2.0 * d * inv;
        }
    }
    out.value = s * inv;
    return out;
}

KlLoss kl_loss(const LatentDistribution& d) {
    const int r = d.mean.resolution();
    const int F = d.mean.channels();
    KlLoss out;
    out.dmean = LatentGrid(r, F);
    out.dlogvar = LatentGrid(r, F);

    std::size_t active = 0;
    for (std::uint8_t m : d.mask) active += m;
    if (active == 0) return out;
    double inv = 1.0 / (static_cast<double>(active) * F);

    double s = 0;
    for (int x = 0; x < r; ++x)
        for (int y = 0; y < r; ++y)
            for (int z = 0; z < r; ++z) {
                if (!d.mask[(static_cast<std::size_t>(x) * r + y) * r + z]) continue;
                for (int k = 0; k < F; ++k) {
                    double mu = d.mean.at(x, y, z, k);
                    double lv = d.logvar.at(x, y, z, k);
                    s += 0.5 * (mu * mu + std::exp(lv) - lv - 1.0);
                    out.dmean.at(x, y, z, k) = mu * inv;
                    out.dlogvar.at(x, y, z, k) = 0.5 * (std::exp(lv) - 1.0) * inv;
                }
            }
    out.value = s * inv;
    return out;
}

RenderLoss render_loss(const GaussianSet& pred, const std::vector<ViewTarget>& views,
                       const LossWeights& w, const RasterConfig& rc) {
    check(!views.empty(), "render loss needs at least one view");
    RenderLoss out;
    out.dgaussians.assign(pred.size(), GaussianGrad{});

    for (const ViewTarget& view : views) {
        Rasterizer raster(view.camera, rc);
        const Image& rendered = raster.forward(pred);
        double l1 = l1_loss(rendered, view.image);
        double ss = ssim(rendered, view.image);
        out.l1 += l1 / views.size();
        out.ssim += ss / views.size();
        out.value += w.l1 * l1 + w.ssim * (1.0 - ss);

        Image dimg = l1_backward(rendered, view.image);
        Image dssim = ssim_backward(rendered, view.image);
        for (std::size_t i = 0; i < dimg.pixels.size(); ++i)
            dimg.pixels[i] = w.l1 * dimg.pixels[i] - w.ssim * dssim.pixels[i];
        std::vector<GaussianGrad> dg = raster.backward(dimg);
        for (std::size_t i = 0; i < dg.size(); ++i) {
            out.dgaussians[i].position += dg[i].position;
            out.dgaussians[i].color += dg[i].color;
            out.dgaussians[i].log_scale += dg[i].log_scale;
            out.dgaussians[i].rotation.w += dg[i].rotation.w;
            out.dgaussians[i].rotation.x += dg[i].rotation.x;
            out.dgaussians[i].rotation.y += dg[i].rotation.y;
            out.dgaussians[i].rotation.z += dg[i].rotation.z;
            out.dgaussians[i].opacity_logit += dg[i].opacity_logit;
        }
    }
    return out;
}

VaeStepLosses vae_training_step(VaeModel& model, const SparseVoxelTensor& gt,
                                const std::vector<ViewTarget>& views, int iter, Rng& rng,
                                const RasterConfig& rc) {
    const LossWeights& w = model.config().weights;
    const int F = model.config().latent_channels;
    model.params().zero_grad();

    LatentDistribution dist = model.encode(gt);
    KlLoss kl = kl_loss(dist);
    LatentGrid eps;
    LatentGrid z = reparameterize(dist, rng, &eps);
    DecodeResult dec = model.decode(z, PruneMode::kTeacherForced, &gt);
    OccupancyLoss occ = occupancy_loss(dec, gt);

    VaeStepLosses losses;
    losses.kl = kl.value;
    losses.occupancy = occ.value;

    // Predicted-keep IoU at the final stage, for monitoring.
    if (dec.stages.size() == 3) {
        const DecodeStage& fine = dec.stages[2];
        auto keys = coord_keys_at(gt, fine.pre_prune.resolution());
        std::size_t inter = 0, pred_n = 0;
        for (std::size_t i = 0; i < fine.logits.size(); ++i) {
            if (sigmoid(fine.logits[i]) <= 0.5) continue;
            ++pred_n;
            if (keys.count(coord_key(fine.pre_prune.coord(i)))) ++inter;
        }
        std::size_t uni = pred_n + gt.size() - inter;
        losses.iou = uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
    }

    bool warm = iter < model.config().warmup_iters;
    SparseVoxelTensor d_attrs = SparseVoxelTensor::aligned(dec.attrs, dec.attrs.channels());
    if (!warm) {
        AttrLoss attr = attr_loss(dec.attrs, gt);
        losses.attr = attr.value;
        losses.empty_intersection = attr.empty_intersection;
        for (std::size_t i = 0; i < d_attrs.features().size(); ++i)
            d_attrs.features()[i] += w.attr * attr.dpred.features()[i];

        GaussianSet splats = devoxelize(dec.attrs);
        RenderLoss rl = render_loss(splats, views, w, rc);
        losses.render = rl.value;
        std::vector<double> drows = devoxelize_backward(dec.attrs, rl.dgaussians);
        for (std::size_t i = 0; i < d_attrs.features().size(); ++i)
            d_attrs.features()[i] += w.render * drows[i];
    }

    std::vector<std::vector<double>> dlogits = occ.dlogits;
    for (auto& stage : dlogits)
        for (double& v : stage) v *= w.occupancy;
    LatentGrid dz = model.decode_backward(d_attrs, dlogits);

    // Through the sampling: z = mean + exp(lv/2) * eps.
    const int r = dist.mean.resolution();
    LatentGrid dmean = kl.dmean, dlogvar = kl.dlogvar;
    for (std::size_t i = 0; i < dmean.data().size(); ++i) {
        dmean.data()[i] *= w.kl;
        dlogvar.data()[i] *= w.kl;
    }
    for (int x = 0; x < r; ++x)
        for (int y = 0; y < r; ++y)
            for (int zz = 0; zz < r; ++zz)
                for (int k = 0; k < F; ++k) {
                    double g = dz.at(x, y, zz, k);
                    if (g == 0.0) continue;
                    dmean.at(x, y, zz, k) += g;
                    dlogvar.at(x, y, zz, k) += g * eps.at(x, y, zz, k) * 0.5 *
                                               std::exp(0.5 * dist.logvar.at(x, y, zz, k));
                }
    model.encode_backward(dmean, dlogvar);

    losses.total = w.kl * losses.kl + w.occupancy * losses.occupancy;
    if (!warm) losses.total += w.attr * losses.attr + w.render * losses.render;
    return losses;
}

} // namespace jga
