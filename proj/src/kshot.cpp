#include "dmnet/kshot.hpp"

#include "dmnet/error.hpp"
#include "dmnet/ops.hpp"

namespace dmnet {

Tensor appearance_factors(const std::vector<Tensor>& affinities) {
    if (affinities.empty()) throw ShapeError("appearance_factors: no branches");
    std::vector<Tensor> means;
    means.reserve(affinities.size());
    for (const auto& a : affinities) {
        if (a.shape() != affinities.front().shape())
            throw ShapeError("appearance_factors: affinity shape mismatch");
        means.push_back(ops::mean_all(a));
    }
    Tensor stacked = ops::reshape(ops::stack0(means), {static_cast<int>(means.size())});
    return ops::softmax_vec(stacked);
}

SegmentationPrediction fused_predict(const Tensor& f_q,
                                     const std::vector<PrototypePair>& branch_prototypes,
                                     const Tensor& phi, double tau) {
    const int k = static_cast<int>(branch_prototypes.size());
    if (k < 1 || phi.numel() != k) throw ShapeError("fused_predict: phi/branch count mismatch");
    std::vector<Tensor> fgs, bgs;
    fgs.reserve(k);
    bgs.reserve(k);
    for (const auto& p : branch_prototypes) {
        fgs.push_back(p.foreground);
        bgs.push_back(p.background);
    }
    PrototypePair fused;
    fused.foreground = ops::lincomb(fgs, phi);
    fused.background = ops::lincomb(bgs, phi);
    std::vector<Tensor> maps = {ops::cosine_map(f_q, fused.foreground),
                                ops::cosine_map(f_q, fused.background)};
    return SegmentationPrediction::from_logits(ops::scale(ops::stack0(maps), tau));
}

}  // namespace dmnet
