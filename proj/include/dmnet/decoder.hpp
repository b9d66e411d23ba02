#pragma once

#include <vector>

#include "dmnet/config.hpp"
#include "dmnet/nn.hpp"
#include "dmnet/tensor.hpp"

namespace dmnet {

// Two-channel dense prediction: channel 0 = foreground, channel 1 =
// background. probs = softmax(logits) over the channel axis.
struct SegmentationPrediction {
    Tensor logits;  // (2,h,w)
    Tensor probs;   // (2,h,w)

    static SegmentationPrediction from_logits(const Tensor& logits);
    Tensor fg() const;  // (h,w) foreground probability
    Tensor bg() const;  // (h,w) background probability
};

// Fuses query features, the expanded support prototype and the two guidance
// maps into the initial prediction: concat (2C+2) -> 1x1 -> two 3x3 -> ASPP
// (dilations 1/6/12/18, fused by 1x1) -> 1x1 to 2 channels.
class Decoder {
public:
    Decoder(nn::ParamStore& ps, int channels, Rng& rng);

    SegmentationPrediction decode(const Tensor& f_q, const Tensor& prototype,
                                  const Tensor& m_p, const Tensor& m_a) const;

private:
    int channels_;
    nn::Conv2d reduce_, conv1_, conv2_;
    nn::Conv2d aspp1_, aspp6_, aspp12_, aspp18_, aspp_fuse_;
    nn::Conv2d head_;
};

// L = BCE(y_final fg, M_q) + eta * BCE(y_q fg, M_q); predictions are
// bilinearly upsampled to the mask resolution first.
Tensor segmentation_loss(const SegmentationPrediction& y_final, const SegmentationPrediction& y_q,
                         const std::vector<double>& m_q, int height, int width, double eta);

}  // namespace dmnet
