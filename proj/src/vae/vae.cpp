#include "jga/vae/vae.hpp"

namespace jga {

VaeModel::VaeModel(const VaeConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(derive_seed(seed, "vae-init"));
    const auto& w = cfg_.widths;
    const int F = cfg_.latent_channels;

    enc_stem_ = std::make_unique<SparseConv3d>(params_, "enc.stem", cfg_.attr_channels,
                                               w[0], 3, 1, 1, rng);
    for (int i = 0; i < 3; ++i) {
        // Light blocks at the two finest levels keep per-voxel cost down
        // where active sets are largest.
        enc_res_.push_back(std::make_unique<SparseResBlock>(
            params_, "enc.res" + std::to_string(i), w[i], 1, rng, /*light=*/i < 2));
        enc_down_.push_back(std::make_unique<SparseConv3d>(
            params_, "enc.down" + std::to_string(i), w[i], w[i + 1], 2, 2, 1, rng));
    }
    enc_post_ = std::make_unique<SparseResBlock>(params_, "enc.post", w[3], 1, rng);
    enc_norm_ = std::make_unique<SparseGroupNorm>(params_, "enc.norm", w[3], auto_groups(w[3]));
    enc_head_ = std::make_unique<SparseConv3d>(params_, "enc.head", w[3], 2 * F, 3, 1, 1, rng);

    dec_stem_ = std::make_unique<SparseConv3d>(params_, "dec.stem", F, w[3], 3, 1, 1, rng);
    dec_post_ = std::make_unique<SparseResBlock>(params_, "dec.post", w[3], 1, rng);
    for (int i = 2; i >= 0; --i) {
        dec_up_.push_back(std::make_unique<GenSparseTransposeConv3d>(
            params_, "dec.up" + std::to_string(i), w[i + 1], w[i], 2, 2, rng, false,
            cfg_.max_voxels));
        dec_res_.push_back(std::make_unique<SparseResBlock>(
            params_, "dec.res" + std::to_string(i), w[i], 1, rng, /*light=*/i < 2));
        dec_occ_.push_back(std::make_unique<SparseConv3d>(
            params_, "dec.occ" + std::to_string(i), w[i], 1, 1, 1, 1, rng));
    }
    dec_head_norm_ =
        std::make_unique<SparseGroupNorm>(params_, "dec.head_norm", w[0], auto_groups(w[0]));
    dec_head_ = std::make_unique<SparseConv3d>(params_, "dec.head", w[0],
                                               cfg_.attr_channels, 3, 1, 1, rng);
}

LatentDistribution VaeModel::encode(const SparseVoxelTensor& x) {
    check(!x.empty(), "nothing to encode");
    check(x.resolution() == cfg_.resolution, "encode resolution mismatch");
    check(x.channels() == cfg_.attr_channels, "encode channel layout mismatch");

    SparseVoxelTensor h = enc_stem_->forward(x);
    for (int i = 0; i < 3; ++i) {
        h = enc_res_[i]->forward(h);
        h = enc_down_[i]->forward(h);
    }
    h = enc_post_->forward(h);
    enc_out_ = enc_head_->forward(enc_act_.forward(enc_norm_->forward(h)));

    const int r = cfg_.latent_resolution();
    const int F = cfg_.latent_channels;
    LatentDistribution d{LatentGrid(r, F), LatentGrid(r, F),
                         std::vector<std::uint8_t>(static_cast<std::size_t>(r) * r * r, 0)};
    for (std::size_t i = 0; i < enc_out_.size(); ++i) {
        const Coord& c = enc_out_.coord(i);
        const double* f = enc_out_.feature(i);
        for (int k = 0; k < F; ++k) {
            d.mean.at(c[0], c[1], c[2], k) = f[k];
            d.logvar.at(c[0], c[1], c[2], k) = std::clamp(f[F + k], -15.0, 15.0);
        }
        d.mask[(static_cast<std::size_t>(c[0]) * r + c[1]) * r + c[2]] = 1;
    }
    return d;
}

void VaeModel::encode_backward(const LatentGrid& dmean, const LatentGrid& dlogvar) {
    const int F = cfg_.latent_channels;
    SparseVoxelTensor dout = SparseVoxelTensor::aligned(enc_out_, 2 * F);
    for (std::size_t i = 0; i < enc_out_.size(); ++i) {
        const Coord& c = enc_out_.coord(i);
        double* g = dout.feature(i);
        for (int k = 0; k < F; ++k) {
            g[k] = dmean.at(c[0], c[1], c[2], k);
            double lv = enc_out_.feature(i)[F + k];
            g[F + k] = (lv > -15.0 && lv < 15.0) ? dlogvar.at(c[0], c[1], c[2], k) : 0.0;
        }
    }
    SparseVoxelTensor dh = enc_norm_->backward(enc_act_.backward(enc_head_->backward(dout)));
    dh = enc_post_->backward(dh);
    for (int i = 2; i >= 0; --i) {
        dh = enc_down_[i]->backward(dh);
        dh = enc_res_[i]->backward(dh);
    }
    enc_stem_->backward(dh);
}

DecodeResult VaeModel::decode(const LatentGrid& z, PruneMode mode,
                              const SparseVoxelTensor* gt) {
    check(z.resolution() == cfg_.latent_resolution(), "decode latent resolution mismatch");
    check(z.channels() == cfg_.latent_channels + 1, "decode expects features plus occupancy");
    if (mode == PruneMode::kTeacherForced)
        check(gt != nullptr, "teacher forcing needs the ground-truth tensor");

    dec_in_ = sparsify(z, 0.5);
    check(!dec_in_.empty(), "degenerate latent: no active cells to decode");

    DecodeResult res;
    dec_prunes_.clear();
    dec_pre_.clear();
    SparseVoxelTensor h = dec_post_->forward(dec_stem_->forward(dec_in_));
    for (int s = 0; s < 3; ++s) {
        h = dec_up_[s]->forward(h);
        h = dec_res_[s]->forward(h);
        SparseVoxelTensor logits_t = dec_occ_[s]->forward(h);
        dec_pre_.push_back(h);

        DecodeStage stage;
        stage.pre_prune = h;
        stage.logits.assign(logits_t.features().begin(), logits_t.features().end());
        stage.keep.assign(h.size(), 1);
        if (mode == PruneMode::kPredicted) {
            for (std::size_t i = 0; i < h.size(); ++i)
                stage.keep[i] = sigmoid(stage.logits[i]) > 0.5;
        } else if (mode == PruneMode::kTeacherForced) {
            auto keys = coord_keys_at(*gt, h.resolution());
            for (std::size_t i = 0; i < h.size(); ++i)
                stage.keep[i] = keys.count(coord_key(h.coord(i))) > 0;
        }
        PruneResult pr = prune_mask(h, stage.keep);
        stage.all_pruned = pr.all_pruned;
        h = pr.kept;
        dec_prunes_.push_back(std::move(pr));
        res.stages.push_back(std::move(stage));
        if (h.empty()) break;
    }

    if (h.empty() || static_cast<int>(res.stages.size()) < 3) {
        res.attrs = SparseVoxelTensor(cfg_.resolution, cfg_.attr_channels);
        return res;
    }
    res.attrs = dec_head_->forward(dec_head_act_.forward(dec_head_norm_->forward(h)));
    return res;
}

LatentGrid VaeModel::decode_backward(const SparseVoxelTensor& d_attrs,
                                     const std::vector<std::vector<double>>& stage_dlogits) {
    check(dec_prunes_.size() == 3, "decode_backward needs a complete forward decode");
    SparseVoxelTensor dh =
        dec_head_norm_->backward(dec_head_act_.backward(dec_head_->backward(d_attrs)));
    for (int s = 2; s >= 0; --s) {
        dh = prune_backward(dec_pre_[s], dec_prunes_[s], dh);
        // Occupancy head gradient joins at the pre-prune features.
        check(stage_dlogits[s].size() == dh.size(), "stage logit gradient mismatch");
        SparseVoxelTensor dlog = SparseVoxelTensor::aligned(dh, 1);
        for (std::size_t i = 0; i < dlog.size(); ++i)
            dlog.feature(i)[0] = stage_dlogits[s][i];
        SparseVoxelTensor from_occ = dec_occ_[s]->backward(dlog);
        for (std::size_t i = 0; i < dh.features().size(); ++i)
            dh.features()[i] += from_occ.features()[i];
        dh = dec_res_[s]->backward(dh);
        dh = dec_up_[s]->backward(dh);
    }
    dh = dec_stem_->backward(dec_post_->backward(dh));

    LatentGrid dz(cfg_.latent_resolution(), cfg_.latent_channels + 1);
    for (std::size_t i = 0; i < dec_in_.size(); ++i) {
        const Coord& c = dec_in_.coord(i);
        for (int k = 0; k < cfg_.latent_channels; ++k)
            dz.at(c[0], c[1], c[2], k) = dh.feature(i)[k];
    }
    return dz;
}

LatentGrid reparameterize(const LatentDistribution& d, Rng& rng, LatentGrid* eps_out) {
    const int r = d.mean.resolution();
    const int F = d.mean.channels();
    LatentGrid z(r, F + 1);
    if (eps_out) *eps_out = LatentGrid(r, F);
    for (int x = 0; x < r; ++x)
        for (int y = 0; y < r; ++y)
            for (int zz = 0; zz < r; ++zz) {
                std::size_t m = (static_cast<std::size_t>(x) * r + y) * r + zz;
                if (!d.mask[m]) continue;
                for (int k = 0; k < F; ++k) {
                    double eps = rng.normal();
                    if (eps_out) eps_out->at(x, y, zz, k) = eps;
                    z.at(x, y, zz, k) =
                        d.mean.at(x, y, zz, k) + std::exp(0.5 * d.logvar.at(x, y, zz, k)) * eps;
                }
                z.at(x, y, zz, F) = 1.0;
            }
    return z;
}

std::unordered_map<std::uint64_t, char> coord_keys_at(const SparseVoxelTensor& gt,
                                                      int resolution) {
    check(gt.resolution() % resolution == 0, "incompatible downsample resolution");
    int factor = gt.resolution() / resolution;
    std::unordered_map<std::uint64_t, char> keys;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const Coord& c = gt.coord(i);
        keys.emplace(coord_key({c[0] / factor, c[1] / factor, c[2] / factor}), 1);
    }
    return keys;
}

} // namespace jga
