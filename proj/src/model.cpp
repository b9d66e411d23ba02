#include "dmnet/model.hpp"

#include <sstream>

#include "dmnet/error.hpp"
#include "dmnet/ops.hpp"

namespace dmnet {

namespace {

std::vector<double> inverted(const std::vector<double>& m) {
    std::vector<double> out(m.size());
    for (size_t i = 0; i < m.size(); ++i) out[i] = 1.0 - m[i];
    return out;
}

// Detached MAP prototype; an empty region yields the zero vector, whose
// cosine similarity is defined as 0 everywhere.
std::vector<double> map_or_zero(const Tensor& f, const std::vector<double>& mask) {
    double total = 0.0;
    for (double v : mask) total += v;
    if (total <= 0.0) return std::vector<double>(f.dim(0), 0.0);
    return ops::masked_avg_pool(f, mask).values();
}

// Training-free correlation prior for the mining-ablated path: each query
// pixel's best cosine match among support foreground pixels, min-max
// normalized over the grid (constant map degenerates to 0.5).
Tensor prior_map(const Tensor& f_q_high, const Tensor& f_s_high, const std::vector<double>& m_s,
                 int h, int w) {
    const int c = f_q_high.dim(0), hw = h * w;
    const auto& q = f_q_high.values();
    const auto& s = f_s_high.values();
    std::vector<double> s_norm(hw, 0.0);
    for (int j = 0; j < hw; ++j) {
        double n = 0.0;
        for (int ch = 0; ch < c; ++ch) n += s[ch * hw + j] * s[ch * hw + j];
        s_norm[j] = std::sqrt(n);
    }
    std::vector<double> best(hw, -1.0);
    for (int i = 0; i < hw; ++i) {
        double qn = 0.0;
        for (int ch = 0; ch < c; ++ch) qn += q[ch * hw + i] * q[ch * hw + i];
        qn = std::sqrt(qn);
        for (int j = 0; j < hw; ++j) {
            if (m_s[j] <= 0.0) continue;
            double dot = 0.0;
            for (int ch = 0; ch < c; ++ch) dot += q[ch * hw + i] * s[ch * hw + j];
            const double cosv = (qn <= 0.0 || s_norm[j] <= 0.0) ? 0.0 : dot / (qn * s_norm[j]);
            best[i] = std::max(best[i], cosv);
        }
    }
    double mn = best[0], mx = best[0];
    for (double v : best) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    std::vector<double> out(hw, 0.5);
    if (mx > mn)
        for (int i = 0; i < hw; ++i) out[i] = (best[i] - mn) / (mx - mn);
    return Tensor::constant({h, w}, std::move(out));
}

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (const auto& n : names) {
        if (!out.empty()) out += ",";
        out += n;
    }
    return out;
}

}  // namespace

Model::Model(const Config& cfg, const FoldSpec& fold)
    : cfg_(cfg), fold_(fold), backbone_(make_backbone(cfg.model)), csrm_(cfg.csrm),
      memory_(MetaMemory::create(fold.n_known(), backbone_->high_dim(), cfg.kms.rho)) {
    Rng rng(derive_seed(static_cast<std::uint64_t>(cfg.train.seed), 0x1717));
    if (cfg.model.use_cprm)
        cprm_.emplace(params_, cfg.cprm, backbone_->mid_dim(), rng);
    decoder_.emplace(params_, backbone_->mid_dim(), rng);
}

void Model::set_feature_cache(bool enabled) {
    cache_enabled_ = enabled;
    if (!enabled) feature_cache_.clear();
}

FeatureBundle Model::features(const ImageU8& img) {
    if (!cache_enabled_) return backbone_->extract(img);
    const std::uint64_t key = bytes_hash(img.pixels.data(), img.pixels.size());
    auto it = feature_cache_.find(key);
    if (it != feature_cache_.end()) return it->second;
    FeatureBundle fb = backbone_->extract(img);
    feature_cache_.emplace(key, fb);
    return fb;
}

Model::BranchOut Model::run_branch(const FeatureBundle& fq, const FeatureBundle& fs,
                                   const std::vector<double>& m_s_feat, int target_class,
                                   Mode mode) {
    const int h = fq.mid.dim(1), w = fq.mid.dim(2);
    BranchOut out;

    Tensor prototype;
    Tensor m_p;
    if (cprm_) {
        const Tensor masked = Cprm::mask_support(fs.mid, m_s_feat);
        const Cprm::PositionOut pos = cprm_->position_mining(fq.mid, masked);
        const Cprm::ChannelOut chn = cprm_->channel_mining(fq.mid, masked);
        const Cprm::AggregateOut agg =
            cprm_->aggregate(pos.f_q, chn.f_q, pos.f_s, chn.f_s, m_s_feat);
        out.f_q_agg = agg.f_q;
        out.l_p = pos.l_p;
        prototype = agg.prototype;
        m_p = Cprm::positional_activation_map(pos.l_p, h, w);
    } else {
        // mining ablated: plain features, MAP prototype, the training-free
        // correlation prior as the guidance map, raw correlation affinity for
        // the K-shot appearance factors
        out.f_q_agg = fq.mid;
        prototype = ops::masked_avg_pool(fs.mid, m_s_feat);
        const Tensor w_q = ops::reshape(fq.mid, {fq.mid.dim(0), h * w});
        const Tensor w_s =
            ops::reshape(Cprm::mask_support(fs.mid, m_s_feat), {fs.mid.dim(0), h * w});
        out.l_p = ops::matmul(ops::transpose(w_q), w_s);
        m_p = prior_map(fq.high, fs.high, m_s_feat, h, w);
    }

    std::vector<double> m_a(static_cast<size_t>(h) * w, 0.5);
    if (cfg_.model.use_kms) {
        const std::vector<double> p_f_high = map_or_zero(fs.high, m_s_feat);
        const std::vector<double> p_b_high = map_or_zero(fs.high, inverted(m_s_feat));
        if (mode == Mode::train) {
            const int slot = fold_.train_slot(target_class);
            memory_.update(slot, p_f_high, p_b_high);
            m_a = suppress_train(fq.high, memory_, slot);
        } else {
            m_a = suppress_test(fq.high, p_f_high, p_b_high, memory_);
        }
    }

    out.y_q = decoder_->decode(out.f_q_agg, prototype, m_p, Tensor::constant({h, w}, m_a));
    if (cfg_.model.use_csrm) {
        out.y_final = csrm_.refine(out.f_q_agg, out.y_q, &out.merged);
        out.has_merged = true;
    } else {
        out.y_final = out.y_q;
    }
    return out;
}

Model::EpisodeOutput Model::forward_episode(const Episode& ep, Mode mode) {
    const int K = static_cast<int>(ep.support_images.size());
    if (K < 1) throw SamplingError("episode has no support images");
    const FeatureBundle fq = features(ep.query_image);
    const int h = fq.mid.dim(1), w = fq.mid.dim(2);

    std::vector<BranchOut> branches;
    branches.reserve(K);
    for (int j = 0; j < K; ++j) {
        const FeatureBundle fs = features(ep.support_images[j]);
        if (fs.mid.dim(1) != h || fs.mid.dim(2) != w)
            throw ShapeError("support/query feature grids differ");
        const std::vector<double> m_s_feat =
            downsample_mask_max(ep.support_masks[j], ep.height, ep.width, h, w);
        branches.push_back(run_branch(fq, fs, m_s_feat, ep.target_class, mode));
    }

    EpisodeOutput out;
    if (K == 1) {
        out.y_q = branches[0].y_q;
        out.y_final = branches[0].y_final;
    } else {
        std::vector<Tensor> affinities;
        for (const auto& b : branches) affinities.push_back(b.l_p);
        const Tensor phi = appearance_factors(affinities).detach();

        std::vector<Tensor> q_probs;
        for (const auto& b : branches) q_probs.push_back(b.y_q.probs);
        out.y_q.probs = ops::lincomb(q_probs, phi);

        bool all_merged = true;
        for (const auto& b : branches) all_merged = all_merged && b.has_merged;
        if (all_merged) {
            std::vector<Tensor> f_qs;
            std::vector<PrototypePair> pairs;
            for (const auto& b : branches) {
                f_qs.push_back(b.f_q_agg);
                pairs.push_back(b.merged);
            }
            const Tensor fused_f_q = ops::lincomb(f_qs, phi);
            out.y_final = fused_predict(fused_f_q, pairs, phi, cfg_.csrm.tau);
        } else {
            // refinement ablated: fuse the decoder predictions directly
            std::vector<Tensor> f_probs;
            for (const auto& b : branches) f_probs.push_back(b.y_final.probs);
            out.y_final.probs = ops::lincomb(f_probs, phi);
        }
    }

    if (mode == Mode::train) {
        out.loss = segmentation_loss(out.y_final, out.y_q, ep.query_mask, ep.height, ep.width,
                                     cfg_.train.eta);
        check_finite(out.loss, "episode loss");
    }

    const Tensor fg_full =
        ops::channel(ops::upsample_bilinear(out.y_final.probs, ep.height, ep.width), 0);
    out.fg_prob_full = fg_full.values();
    return out;
}

void Model::save_checkpoint(const std::string& path) const {
    Archive a;
    a.put_text("config", cfg_.to_string());
    a.put_i64("fold.id", {fold_.fold_id});
    a.put_text("fold.classes", join_names(fold_.class_names));
    std::vector<std::int64_t> train_ids(fold_.training_classes.begin(), fold_.training_classes.end());
    std::vector<std::int64_t> test_ids(fold_.testing_classes.begin(), fold_.testing_classes.end());
    a.put_i64("fold.train", train_ids);
    a.put_i64("fold.test", test_ids);
    for (const auto& [name, t] : params_.items()) a.put_f64("param." + name, t.shape(), t.values());
    memory_.save_into(a, "memory");
    a.save(path);
}

Model Model::load_checkpoint(const std::string& path) {
    const Archive a = Archive::load(path);
    const Config cfg = parse_config_text(a.text("config"));

    FoldSpec fold;
    fold.fold_id = static_cast<int>(a.i64("fold.id")[0]);
    std::istringstream cs(a.text("fold.classes"));
    std::string name;
    while (std::getline(cs, name, ',')) fold.class_names.push_back(name);
    for (auto v : a.i64("fold.train")) fold.training_classes.push_back(static_cast<int>(v));
    for (auto v : a.i64("fold.test")) fold.testing_classes.push_back(static_cast<int>(v));

    Model m(cfg, fold);
    for (auto& [pname, t] : m.params_.items()) {
        const std::string key = "param." + pname;
        if (!a.has(key)) throw DataError("checkpoint missing parameter " + pname);
        if (a.shape_of(key) != t.shape())
            throw DataError("checkpoint parameter " + pname + " has shape " +
                            shape_str(a.shape_of(key)) + ", expected " + shape_str(t.shape()));
        const_cast<Tensor&>(t).values() = a.f64(key);
    }
    m.memory_ = MetaMemory::load_from(a, "memory");
    if (m.memory_.channels != m.backbone_->high_dim())
        throw DataError("checkpoint memory width does not match backbone");
    return m;
}

}  // namespace dmnet
