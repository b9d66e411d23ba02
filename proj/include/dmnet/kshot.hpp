#pragma once

#include <vector>

#include "dmnet/csrm.hpp"
#include "dmnet/tensor.hpp"

namespace dmnet {

// Appearance-similarity reweighting of K support branches: each branch's
// affinity mean is softmaxed into a weight on the simplex.
Tensor appearance_factors(const std::vector<Tensor>& affinities);

// Weighted-sum prototypes, then the standard two-prototype cosine prediction.
SegmentationPrediction fused_predict(const Tensor& f_q,
                                     const std::vector<PrototypePair>& branch_prototypes,
                                     const Tensor& phi, double tau);

}  // namespace dmnet
