#pragma once

#include <vector>

#include "dmnet/config.hpp"
#include "dmnet/nn.hpp"
#include "dmnet/tensor.hpp"

namespace dmnet {

// Class-public region mining: bidirectional position and channel
// cross-attention between the masked support features and the query
// features, then 1x1 aggregation and the positional activation map.
class Cprm {
public:
    Cprm(nn::ParamStore& ps, const CprmConfig& cfg, int channels, Rng& rng);

    struct PositionOut {
        Tensor f_q;  // (C,h,w) position-enhanced query features
        Tensor f_s;  // (C,h,w) position-enhanced support features
        Tensor l_p;  // (hw,hw) affinity, rows = query positions
    };

    struct AggregateOut {
        Tensor f_q;        // (C,h,w) aggregated query features
        Tensor f_s;        // (C,h,w) aggregated support features
        Tensor prototype;  // (C) masked average of f_s
    };

    // output[c,p] = F_s[c,p] * M_s[p]
    static Tensor mask_support(const Tensor& f_s, const std::vector<double>& m_s);

    PositionOut position_mining(const Tensor& f_q, const Tensor& f_s_masked) const;

    // Position mining with channel and position axes swapped; affinity is
    // C x C over spatial descriptors pooled to `rank` bins.
    struct ChannelOut {
        Tensor f_q;
        Tensor f_s;
    };
    ChannelOut channel_mining(const Tensor& f_q, const Tensor& f_s_masked) const;

    AggregateOut aggregate(const Tensor& f_q_p, const Tensor& f_q_c, const Tensor& f_s_p,
                           const Tensor& f_s_c, const std::vector<double>& m_s) const;

    // Row means of the affinity, reshaped to h x w, min-max normalized;
    // constant affinity degenerates to an all-0.5 map.
    static Tensor positional_activation_map(const Tensor& l_p, int h, int w);

    const Tensor& alpha1() const { return alpha1_; }
    const Tensor& beta1() const { return beta1_; }
    const Tensor& alpha2() const { return alpha2_; }
    const Tensor& beta2() const { return beta2_; }
    const Tensor& w_p() const { return w_p_; }

private:
    int channels_;
    int rank_;
    double lambda_fuse_;
    Tensor alpha1_, beta1_;  // position fusion scalars
    Tensor alpha2_, beta2_;  // channel fusion scalars
    Tensor w_p_;             // (C,C) position affinity scale
    Tensor m_c_;             // (rank,rank) channel affinity scale
    nn::Conv2d agg_q_, agg_s_;
};

}  // namespace dmnet
