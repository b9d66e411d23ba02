#include "dmnet/csrm.hpp"

#include <algorithm>

#include "dmnet/error.hpp"
#include "dmnet/ops.hpp"

namespace dmnet {

namespace {

bool any_positive(const std::vector<double>& m) {
    for (double v : m)
        if (v > 0.0) return true;
    return false;
}

}  // namespace

RegionPartition Csrm::filter_regions(const SegmentationPrediction& y, double mu1, double mu2) {
    const int h = y.probs.dim(1), w = y.probs.dim(2);
    const auto& p = y.probs.values();  // channel 0 = fg, channel 1 = bg
    const int hw = h * w;
    RegionPartition out;
    out.mu1 = mu1;
    out.mu2 = mu2;
    out.h = h;
    out.w = w;
    out.m_f.assign(hw, 0.0);
    out.m_b.assign(hw, 0.0);
    out.m_c.assign(hw, 0.0);
    out.p_f.assign(p.begin(), p.begin() + hw);
    out.p_b.assign(p.begin() + hw, p.begin() + 2 * hw);
    for (int i = 0; i < hw; ++i) {
        const double pf = p[i], pb = p[hw + i];
        if (pf >= mu1)
            out.m_f[i] = 1.0;
        else if (pb >= mu2)
            out.m_b[i] = 1.0;
        else
            out.m_c[i] = 1.0;
    }
    return out;
}

Tensor Csrm::cosine_predict(const Tensor& f_q, const std::vector<Tensor>& prototypes, double tau) {
    if (prototypes.size() < 2) throw ShapeError("cosine_predict: needs >= 2 prototypes");
    std::vector<Tensor> maps;
    maps.reserve(prototypes.size());
    for (const auto& p : prototypes) maps.push_back(ops::cosine_map(f_q, p));
    return ops::softmax_axis0(ops::scale(ops::stack0(maps), tau));
}

Tensor Csrm::region_prototype(const Tensor& f_q, const std::vector<double>& mask,
                              const std::vector<double>& score) {
    if (any_positive(mask)) return ops::masked_avg_pool(f_q, mask);
    // empty region: fall back to the single most confident pixel
    if (score.size() != mask.size()) throw ShapeError("region_prototype: score size mismatch");
    size_t best = 0;
    for (size_t i = 1; i < score.size(); ++i)
        if (score[i] > score[best]) best = i;
    std::vector<double> one(mask.size(), 0.0);
    one[best] = 1.0;
    return ops::masked_avg_pool(f_q, one);
}

Csrm::MiningOut Csrm::confusion_mining(const Tensor& f_q, const RegionPartition& partition) const {
    const int hw = partition.h * partition.w;
    if (f_q.dim(1) * f_q.dim(2) != hw) throw ShapeError("confusion_mining: feature/partition mismatch");

    MiningOut out;
    out.m_f_acc = partition.m_f;
    out.m_b_acc = partition.m_b;
    out.m_c_left = partition.m_c;

    // empty-region fallback uses the partition's own probability maps
    const std::vector<double>& fg_score = partition.p_f;
    const std::vector<double>& bg_score = partition.p_b;
    if (static_cast<int>(fg_score.size()) != hw || static_cast<int>(bg_score.size()) != hw)
        throw ShapeError("confusion_mining: partition lacks probability maps");

    Tensor p_f = region_prototype(f_q, out.m_f_acc, fg_score);
    Tensor p_b = region_prototype(f_q, out.m_b_acc, bg_score);

    for (int iter = 0; iter < cfg_.cpm_iters; ++iter) {
        if (!any_positive(out.m_c_left)) break;
        const double mu1 = cfg_.mu1 - iter * cfg_.step_mu1;
        const double mu2 = cfg_.mu2 - iter * cfg_.step_mu2;

        // classify only the current confusion pixels
        const Tensor scores = cosine_predict(f_q, {p_f, p_b}, cfg_.tau);
        const auto& sv = scores.values();
        std::vector<double> next_c(hw, 0.0);
        bool fg_changed = false, bg_changed = false;
        for (int i = 0; i < hw; ++i) {
            if (out.m_c_left[i] <= 0.0) continue;
            const double pf = sv[i], pb = sv[hw + i];
            if (pf >= mu1) {
                out.m_f_acc[i] = 1.0;
                fg_changed = true;
            } else if (pb >= mu2) {
                out.m_b_acc[i] = 1.0;
                bg_changed = true;
            } else {
                next_c[i] = 1.0;
            }
        }
        out.m_c_left = std::move(next_c);
        // prototypes over the accumulated masks
        if (fg_changed) p_f = region_prototype(f_q, out.m_f_acc, fg_score);
        if (bg_changed) p_b = region_prototype(f_q, out.m_b_acc, bg_score);
    }

    out.refined.foreground = p_f;
    out.refined.background = p_b;
    return out;
}

PrototypePair Csrm::merge_prototypes(const PrototypePair& refined, const PrototypePair& filtered,
                                     double gamma1, double gamma2) {
    PrototypePair out;
    out.foreground = ops::add(ops::scale(refined.foreground, gamma1),
                              ops::scale(filtered.foreground, gamma2));
    out.background = ops::add(ops::scale(refined.background, gamma1),
                              ops::scale(filtered.background, gamma2));
    return out;
}

SegmentationPrediction Csrm::final_predict(const Tensor& f_q, const PrototypePair& merged) const {
    std::vector<Tensor> maps = {ops::cosine_map(f_q, merged.foreground),
                                ops::cosine_map(f_q, merged.background)};
    return SegmentationPrediction::from_logits(ops::scale(ops::stack0(maps), cfg_.tau));
}

SegmentationPrediction Csrm::refine(const Tensor& f_q, const SegmentationPrediction& y,
                                    PrototypePair* merged_out) const {
    const RegionPartition part = filter_regions(y, cfg_.mu1, cfg_.mu2);

    PrototypePair filtered;
    filtered.foreground = region_prototype(f_q, part.m_f, part.p_f);
    filtered.background = region_prototype(f_q, part.m_b, part.p_b);

    const MiningOut mined = confusion_mining(f_q, part);
    const PrototypePair merged = merge_prototypes(mined.refined, filtered, cfg_.gamma1, cfg_.gamma2);
    if (merged_out) *merged_out = merged;
    return final_predict(f_q, merged);
}

}  // namespace dmnet
