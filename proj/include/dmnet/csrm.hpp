#pragma once

#include <vector>

#include "dmnet/config.hpp"
#include "dmnet/decoder.hpp"
#include "dmnet/tensor.hpp"

namespace dmnet {

// Disjoint pixel partition of a prediction into confident foreground,
// confident background and the confusion region. Masks are row-major {0,1}.
struct RegionPartition {
    std::vector<double> m_f;
    std::vector<double> m_b;
    std::vector<double> m_c;
    std::vector<double> p_f;  // foreground probabilities the partition came from
    std::vector<double> p_b;
    double mu1 = 0.0;
    double mu2 = 0.0;
    int h = 0;
    int w = 0;
};

struct PrototypePair {
    Tensor foreground;  // (C)
    Tensor background;  // (C)
};

// Class-specific region mining. Parameter-free: prototypes come from the
// query's own features, masks are detached indicators, and gradients flow
// only through the features and prototypes.
class Csrm {
public:
    explicit Csrm(const CsrmConfig& cfg) : cfg_(cfg) {}

    static RegionPartition filter_regions(const SegmentationPrediction& y, double mu1, double mu2);

    // Per-pixel cosine similarity to each prototype, scaled by tau and
    // softmaxed over the prototype axis. Output (P,h,w).
    static Tensor cosine_predict(const Tensor& f_q, const std::vector<Tensor>& prototypes,
                                 double tau);

    struct MiningOut {
        PrototypePair refined;
        std::vector<double> m_f_acc;  // accumulated foreground mask
        std::vector<double> m_b_acc;  // accumulated background mask
        std::vector<double> m_c_left; // leftover confusion region
    };
    MiningOut confusion_mining(const Tensor& f_q, const RegionPartition& partition) const;

    static PrototypePair merge_prototypes(const PrototypePair& refined, const PrototypePair& filtered,
                                          double gamma1, double gamma2);

    SegmentationPrediction final_predict(const Tensor& f_q, const PrototypePair& merged) const;

    // Full pass: partition -> filtered prototypes -> mining -> merge -> predict.
    SegmentationPrediction refine(const Tensor& f_q, const SegmentationPrediction& y,
                                  PrototypePair* merged_out = nullptr) const;

    // MAP prototype with the empty-mask fallback: an all-zero region uses the
    // single pixel with the highest score instead.
    static Tensor region_prototype(const Tensor& f_q, const std::vector<double>& mask,
                                   const std::vector<double>& score);

    const CsrmConfig& config() const { return cfg_; }

private:
    CsrmConfig cfg_;
};

}  // namespace dmnet
