#include "dmnet/decoder.hpp"

#include "dmnet/error.hpp"
#include "dmnet/ops.hpp"

namespace dmnet {

SegmentationPrediction SegmentationPrediction::from_logits(const Tensor& logits) {
    if (logits.shape().size() != 3 || logits.dim(0) != 2)
        throw ShapeError("prediction logits must be (2,h,w)");
    SegmentationPrediction p;
    p.logits = logits;
    p.probs = ops::softmax_axis0(logits);
    return p;
}

Tensor SegmentationPrediction::fg() const { return ops::channel(probs, 0); }
Tensor SegmentationPrediction::bg() const { return ops::channel(probs, 1); }

Decoder::Decoder(nn::ParamStore& ps, int channels, Rng& rng) : channels_(channels) {
    const int c = channels;
    reduce_ = nn::Conv2d::create(ps, "decoder.reduce", 2 * c + 2, c, 1, 1, 0, 1, true, rng);
    conv1_ = nn::Conv2d::create(ps, "decoder.conv1", c, c, 3, 1, 1, 1, true, rng);
    conv2_ = nn::Conv2d::create(ps, "decoder.conv2", c, c, 3, 1, 1, 1, true, rng);
    aspp1_ = nn::Conv2d::create(ps, "decoder.aspp1", c, c, 3, 1, 1, 1, true, rng);
    aspp6_ = nn::Conv2d::create(ps, "decoder.aspp6", c, c, 3, 1, 6, 6, true, rng);
    aspp12_ = nn::Conv2d::create(ps, "decoder.aspp12", c, c, 3, 1, 12, 12, true, rng);
    aspp18_ = nn::Conv2d::create(ps, "decoder.aspp18", c, c, 3, 1, 18, 18, true, rng);
    aspp_fuse_ = nn::Conv2d::create(ps, "decoder.aspp_fuse", 4 * c, c, 1, 1, 0, 1, true, rng);
    head_ = nn::Conv2d::create(ps, "decoder.head", c, 2, 1, 1, 0, 1, true, rng);
}

SegmentationPrediction Decoder::decode(const Tensor& f_q, const Tensor& prototype,
                                       const Tensor& m_p, const Tensor& m_a) const {
    if (f_q.shape().size() != 3 || f_q.dim(0) != channels_)
        throw ShapeError("decode: f_q must be (C,h,w)");
    const int h = f_q.dim(1), w = f_q.dim(2);
    if (prototype.shape() != Shape{channels_}) throw ShapeError("decode: prototype must be (C)");
    if (m_p.shape() != Shape{h, w} || m_a.shape() != Shape{h, w})
        throw ShapeError("decode: guidance maps must be (h,w)");

    const Tensor x = ops::concat_ch({f_q, ops::broadcast_vec(prototype, h, w),
                                     ops::reshape(m_p, {1, h, w}), ops::reshape(m_a, {1, h, w})});
    Tensor y = ops::relu(reduce_.forward(x));
    y = ops::relu(conv1_.forward(y));
    y = ops::relu(conv2_.forward(y));
    const Tensor aspp = ops::concat_ch(
        {aspp1_.forward(y), aspp6_.forward(y), aspp12_.forward(y), aspp18_.forward(y)});
    y = ops::relu(aspp_fuse_.forward(aspp));
    return SegmentationPrediction::from_logits(head_.forward(y));
}

Tensor segmentation_loss(const SegmentationPrediction& y_final, const SegmentationPrediction& y_q,
                         const std::vector<double>& m_q, int height, int width, double eta) {
    if (static_cast<int>(m_q.size()) != height * width)
        throw ShapeError("segmentation_loss: mask size mismatch");
    auto fg_full = [&](const SegmentationPrediction& p) {
        return ops::channel(ops::upsample_bilinear(p.probs, height, width), 0);
    };
    const Tensor main_term = ops::bce_fg(fg_full(y_final), m_q);
    if (eta == 0.0) return main_term;
    const Tensor aux_term = ops::bce_fg(fg_full(y_q), m_q);
    return ops::add(main_term, ops::scale(aux_term, eta));
}

}  // namespace dmnet
