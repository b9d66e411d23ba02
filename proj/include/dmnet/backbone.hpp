#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dmnet/config.hpp"
#include "dmnet/image.hpp"
#include "dmnet/tensor.hpp"

namespace dmnet {

// Frozen per-image features. `mid` feeds the mining modules, `high` feeds
// the meta suppressor. Both live at the same h x w grid.
struct FeatureBundle {
    Tensor mid;   // (C, h, w)
    Tensor high;  // (C_H, h, w)
    int stride = 8;
};

// Frozen feature provider. Weights never change after construction; outputs
// are plain constants, so no gradient ever reaches the backbone.
class Backbone {
public:
    virtual ~Backbone() = default;
    virtual FeatureBundle extract(const ImageU8& img) const = 0;
    virtual int stride() const = 0;
    virtual int mid_dim() const = 0;
    virtual int high_dim() const = 0;
    virtual std::uint64_t weight_hash() const = 0;
};

// backbone = "tiny": fixed-seed 4-stage encoder, no external weights.
// backbone = "vgg16": dilated VGG-16, weights loaded from cfg.weights.
std::unique_ptr<Backbone> make_backbone(const ModelConfig& cfg);

// (H,W,3) bytes -> normalized (3,H,W) constant tensor.
Tensor image_to_tensor(const ImageU8& img, const double mean[3], const double stddev[3]);

// Full-resolution {0,1} mask -> h x w via max pooling over adaptive windows;
// a nonzero input can never pool to an all-zero output.
std::vector<double> downsample_mask_max(const std::vector<double>& mask, int H, int W, int h, int w);

// prototype[c] = sum(F[c]*M) / sum(M); throws EmptyMaskError on all-zero M.
Tensor masked_average_pool(const Tensor& f, const std::vector<double>& mask);

}  // namespace dmnet
