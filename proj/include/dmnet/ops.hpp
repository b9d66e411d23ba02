#pragma once

#include <vector>

#include "dmnet/tensor.hpp"

namespace dmnet::ops {

// elementwise
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor scale_by(const Tensor& s, const Tensor& a);  // scalar node * tensor
Tensor relu(const Tensor& a);
Tensor add_n(const std::vector<Tensor>& xs);

// linear algebra on 2-D tensors
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

// softmax
Tensor softmax_rows(const Tensor& a);   // (m,n): each row sums to 1
Tensor softmax_cols(const Tensor& a);   // (m,n): each column sums to 1
Tensor softmax_axis0(const Tensor& a);  // (K,...): softmax over axis 0 per position
Tensor softmax_vec(const Tensor& a);    // (K)

// maps and reductions
Tensor row_mean(const Tensor& a);                       // (m,n) -> (m)
Tensor mean_all(const Tensor& a);                       // -> (1)
Tensor sum_all(const Tensor& a);                        // -> (1)
Tensor minmax_norm(const Tensor& a, double degenerate = 0.5);
Tensor channel(const Tensor& a, int k);                 // (K,h,w) -> (h,w)
Tensor stack0(const std::vector<Tensor>& xs);           // k same-shape -> (k,...)
Tensor concat_ch(const std::vector<Tensor>& xs);        // (Ci,h,w) -> (sum Ci,h,w)
Tensor broadcast_vec(const Tensor& v, int h, int w);    // (C) -> (C,h,w)
Tensor lincomb(const std::vector<Tensor>& xs, const Tensor& w);  // sum_j w[j]*xs[j]

// masks are plain (non-learnable) weights
Tensor mul_mask(const Tensor& x, const std::vector<double>& mask);       // (C,h,w)
Tensor masked_avg_pool(const Tensor& x, const std::vector<double>& mask);  // -> (C)

// dense prediction pieces
Tensor cosine_map(const Tensor& x, const Tensor& p);  // (C,h,w),(C) -> (h,w); cos with zero vector = 0
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding, int dilation);
Tensor upsample_bilinear(const Tensor& x, int out_h, int out_w);
Tensor adaptive_pool_cols(const Tensor& a, int out_len);  // (R,L) -> (R,out_len)

// pixel-mean binary cross entropy of a foreground-probability map against a
// {0,1} target; probabilities clamped to [eps, 1-eps]
Tensor bce_fg(const Tensor& prob, const std::vector<double>& target, double eps = 1e-7);

}  // namespace dmnet::ops
