#include "dmnet/cprm.hpp"

#include "dmnet/error.hpp"
#include "dmnet/ops.hpp"

namespace dmnet {

namespace {

std::vector<double> identity_matrix(int n) {
    std::vector<double> v(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) v[static_cast<size_t>(i) * n + i] = 1.0;
    return v;
}

// (C,h,w) -> (C,hw) without copying semantics beyond reshape
Tensor flatten_spatial(const Tensor& x) {
    return ops::reshape(x, {x.dim(0), x.dim(1) * x.dim(2)});
}

}  // namespace

Cprm::Cprm(nn::ParamStore& ps, const CprmConfig& cfg, int channels, Rng& rng)
    : channels_(channels), rank_(cfg.rank), lambda_fuse_(cfg.lambda_fuse) {
    alpha1_ = ps.add("cprm.alpha1", Tensor::param({1}, {0.5}));
    beta1_ = ps.add("cprm.beta1", Tensor::param({1}, {0.5}));
    alpha2_ = ps.add("cprm.alpha2", Tensor::param({1}, {0.5}));
    beta2_ = ps.add("cprm.beta2", Tensor::param({1}, {0.5}));
    // scale matrices start at identity: the initial affinity is the plain
    // feature correlation, and training reshapes it from there
    w_p_ = ps.add("cprm.w_p", Tensor::param({channels, channels}, identity_matrix(channels)));
    m_c_ = ps.add("cprm.m_c", Tensor::param({rank_, rank_}, identity_matrix(rank_)));
    agg_q_ = nn::Conv2d::create(ps, "cprm.agg_q", channels, channels, 1, 1, 0, 1, true, rng);
    agg_s_ = nn::Conv2d::create(ps, "cprm.agg_s", channels, channels, 1, 1, 0, 1, true, rng);
    // aggregation starts as a pass-through so the mined features reach the
    // decoder unmixed; training adapts the mixing from there
    agg_q_.weight.values() = identity_matrix(channels);
    agg_s_.weight.values() = identity_matrix(channels);
}

Tensor Cprm::mask_support(const Tensor& f_s, const std::vector<double>& m_s) {
    return ops::mul_mask(f_s, m_s);
}

Cprm::PositionOut Cprm::position_mining(const Tensor& f_q, const Tensor& f_s_masked) const {
    if (f_q.shape() != f_s_masked.shape())
        throw ShapeError("position_mining: query/support shape mismatch");
    const int h = f_q.dim(1), w = f_q.dim(2);
    const Tensor w_q = flatten_spatial(f_q);         // (C,hw)
    const Tensor w_s = flatten_spatial(f_s_masked);  // (C,hw)

    // affinity rows = query positions, columns = support positions
    const Tensor l_p = ops::matmul(ops::matmul(ops::transpose(w_q), w_p_), w_s);
    check_finite(l_p, "position affinity");
    const Tensor a_s = ops::softmax_rows(l_p);  // query position attends over support
    const Tensor a_q = ops::softmax_cols(l_p);  // support position attends over query

    // f_q^P[:,i] = alpha1 * sum_j A_s[i,j] W_s[:,j] + lambda * W_q[:,i]
    const Tensor mined_q = ops::matmul(w_s, ops::transpose(a_s));
    // f_s^P[:,j] = beta1 * sum_i A_q[i,j] W_q[:,i] + lambda * W_s[:,j]
    const Tensor mined_s = ops::matmul(w_q, a_q);

    PositionOut out;
    out.f_q = ops::reshape(
        ops::add(ops::scale_by(alpha1_, mined_q), ops::scale(w_q, lambda_fuse_)), {channels_, h, w});
    out.f_s = ops::reshape(
        ops::add(ops::scale_by(beta1_, mined_s), ops::scale(w_s, lambda_fuse_)), {channels_, h, w});
    out.l_p = l_p;
    return out;
}

Cprm::ChannelOut Cprm::channel_mining(const Tensor& f_q, const Tensor& f_s_masked) const {
    if (f_q.shape() != f_s_masked.shape())
        throw ShapeError("channel_mining: query/support shape mismatch");
    const int h = f_q.dim(1), w = f_q.dim(2);
    const Tensor d_q = flatten_spatial(f_q);         // (C,hw) channel descriptors
    const Tensor d_s = flatten_spatial(f_s_masked);  // (C,hw)

    // descriptors pooled to `rank` bins keep the bilinear form independent
    // of the spatial resolution
    const Tensor p_q = ops::adaptive_pool_cols(d_q, rank_);  // (C,rank)
    const Tensor p_s = ops::adaptive_pool_cols(d_s, rank_);
    // affinity rows = query channels, columns = support channels
    const Tensor l_c = ops::matmul(ops::matmul(p_q, m_c_), ops::transpose(p_s));  // (C,C)
    check_finite(l_c, "channel affinity");
    const Tensor a_s = ops::softmax_rows(l_c);  // query channel attends over support channels
    const Tensor a_q = ops::softmax_cols(l_c);

    // f_q^C[a,:] = alpha2 * sum_b A_s[a,b] D_s[b,:] + lambda * D_q[a,:]
    const Tensor mined_q = ops::matmul(a_s, d_s);
    // f_s^C[b,:] = beta2 * sum_a A_q[a,b] D_q[a,:] + lambda * D_s[b,:]
    const Tensor mined_s = ops::matmul(ops::transpose(a_q), d_q);

    ChannelOut out;
    out.f_q = ops::reshape(
        ops::add(ops::scale_by(alpha2_, mined_q), ops::scale(d_q, lambda_fuse_)), {channels_, h, w});
    out.f_s = ops::reshape(
        ops::add(ops::scale_by(beta2_, mined_s), ops::scale(d_s, lambda_fuse_)), {channels_, h, w});
    return out;
}

Cprm::AggregateOut Cprm::aggregate(const Tensor& f_q_p, const Tensor& f_q_c, const Tensor& f_s_p,
                                   const Tensor& f_s_c, const std::vector<double>& m_s) const {
    AggregateOut out;
    out.f_q = agg_q_.forward(ops::add(f_q_p, f_q_c));
    out.f_s = agg_s_.forward(ops::add(f_s_p, f_s_c));
    out.prototype = ops::masked_avg_pool(out.f_s, m_s);
    return out;
}

Tensor Cprm::positional_activation_map(const Tensor& l_p, int h, int w) {
    if (l_p.dim(0) != h * w)
        throw ShapeError("positional_activation_map: affinity rows != h*w");
    const Tensor means = ops::row_mean(l_p);
    return ops::minmax_norm(ops::reshape(means, {h, w}), 0.5);
}

}  // namespace dmnet
