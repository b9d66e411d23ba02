#include "dmnet/backbone.hpp"

#include <algorithm>
#include <cmath>

#include "dmnet/error.hpp"
#include "dmnet/nn.hpp"
#include "dmnet/ops.hpp"
#include "dmnet/rng.hpp"
#include "dmnet/serialize.hpp"

namespace dmnet {

namespace {

// Plain-array CHW map; the backbone is frozen, so its forward pass skips the
// autograd tape entirely.
struct Map {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;

    Map() = default;
    Map(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, 0.0) {}
    double& at(int ch, int y, int x) { return v[(static_cast<size_t>(ch) * h + y) * w + x]; }
    double at(int ch, int y, int x) const { return v[(static_cast<size_t>(ch) * h + y) * w + x]; }
};

struct ConvW {
    int cin = 0, cout = 0, k = 3, stride = 1, padding = 1, dilation = 1;
    std::vector<double> w;  // (cout,cin,k,k)
    std::vector<double> b;  // (cout)
};

Map conv_relu(const Map& x, const ConvW& cw, bool with_relu = true) {
    const int hout = (x.h + 2 * cw.padding - cw.dilation * (cw.k - 1) - 1) / cw.stride + 1;
    const int wout = (x.w + 2 * cw.padding - cw.dilation * (cw.k - 1) - 1) / cw.stride + 1;
    Map out(cw.cout, hout, wout);
    for (int oc = 0; oc < cw.cout; ++oc)
        for (int oy = 0; oy < hout; ++oy)
            for (int ox = 0; ox < wout; ++ox) {
                double s = cw.b[oc];
                for (int ic = 0; ic < cw.cin; ++ic)
                    for (int ky = 0; ky < cw.k; ++ky) {
                        const int iy = oy * cw.stride - cw.padding + ky * cw.dilation;
                        if (iy < 0 || iy >= x.h) continue;
                        for (int kx = 0; kx < cw.k; ++kx) {
                            const int ix = ox * cw.stride - cw.padding + kx * cw.dilation;
                            if (ix < 0 || ix >= x.w) continue;
                            s += cw.w[((oc * cw.cin + ic) * cw.k + ky) * cw.k + kx] * x.at(ic, iy, ix);
                        }
                    }
                out.at(oc, oy, ox) = with_relu && s < 0.0 ? 0.0 : s;
            }
    return out;
}

// 2x2 stride-2 max pool, ceil mode, so spatial size halves as ceil(n/2).
Map maxpool2_ceil(const Map& x) {
    const int hout = (x.h + 1) / 2, wout = (x.w + 1) / 2;
    Map out(x.c, hout, wout);
    for (int c = 0; c < x.c; ++c)
        for (int oy = 0; oy < hout; ++oy)
            for (int ox = 0; ox < wout; ++ox) {
                double m = -1e300;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const int iy = oy * 2 + dy, ix = ox * 2 + dx;
                        if (iy < x.h && ix < x.w) m = std::max(m, x.at(c, iy, ix));
                    }
                out.at(c, oy, ox) = m;
            }
    return out;
}

Map concat_maps(const Map& a, const Map& b) {
    Map out(a.c + b.c, a.h, a.w);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
    return out;
}

Map normalize_image(const ImageU8& img, const double mean[3], const double stddev[3]) {
    Map x(3, img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int xx = 0; xx < img.width; ++xx)
            for (int c = 0; c < 3; ++c)
                x.at(c, y, xx) = (img.at(y, xx, c) / 255.0 - mean[c]) / stddev[c];
    return x;
}

ConvW random_conv(Rng& rng, int cin, int cout, int k, int stride, int padding, int dilation) {
    ConvW cw;
    cw.cin = cin;
    cw.cout = cout;
    cw.k = k;
    cw.stride = stride;
    cw.padding = padding;
    cw.dilation = dilation;
    cw.w = nn::he_init(rng, cin * k * k, cout * cin * k * k);
    cw.b.assign(cout, 0.0);
    return cw;
}

std::uint64_t hash_convs(const std::vector<const ConvW*>& convs) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const ConvW* c : convs) {
        h = bytes_hash(c->w.data(), c->w.size() * sizeof(double), h);
        h = bytes_hash(c->b.data(), c->b.size() * sizeof(double), h);
    }
    return h;
}

constexpr double kTinyMean[3] = {0.5, 0.5, 0.5};
constexpr double kTinyStd[3] = {0.25, 0.25, 0.25};
constexpr double kImagenetMean[3] = {0.485, 0.456, 0.406};
constexpr double kImagenetStd[3] = {0.229, 0.224, 0.225};

// Fixed-seed frozen encoder for desk-scale runs: three stride-2 stages to
// reach stride 8, one dilated stage for the high-level map, and a frozen
// 1x1 reduction of the concatenated stage-3/4 maps for the mid-level map.
class TinyBackbone final : public Backbone {
public:
    explicit TinyBackbone(const ModelConfig& cfg)
        : reduce_dim_(cfg.reduce_dim), high_dim_(cfg.high_dim) {
        if (cfg.stride != 8) throw SpecError("tiny backbone supports stride 8 only");
        Rng rng(derive_seed(static_cast<std::uint64_t>(cfg.backbone_seed), 0xb0b0));
        conv1_ = random_conv(rng, 3, 16, 3, 2, 1, 1);
        conv2_ = random_conv(rng, 16, 24, 3, 2, 1, 1);
        conv3_ = random_conv(rng, 24, 32, 3, 2, 1, 1);
        conv4_ = random_conv(rng, 32, high_dim_, 3, 1, 2, 2);
        reduce_ = random_conv(rng, 32 + high_dim_, reduce_dim_, 1, 1, 0, 1);
    }

    FeatureBundle extract(const ImageU8& img) const override {
        if (img.width < 8 || img.height < 8)
            throw SizeError("image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                            " below backbone minimum 8x8");
        Map x = normalize_image(img, kTinyMean, kTinyStd);
        const Map s1 = conv_relu(x, conv1_);
        const Map s2 = conv_relu(s1, conv2_);
        const Map s3 = conv_relu(s2, conv3_);
        const Map s4 = conv_relu(s3, conv4_);
        const Map mid = conv_relu(concat_maps(s3, s4), reduce_);
        FeatureBundle fb;
        fb.mid = Tensor::constant({mid.c, mid.h, mid.w}, mid.v);
        fb.high = Tensor::constant({s4.c, s4.h, s4.w}, s4.v);
        fb.stride = 8;
        return fb;
    }

    int stride() const override { return 8; }
    int mid_dim() const override { return reduce_dim_; }
    int high_dim() const override { return high_dim_; }
    std::uint64_t weight_hash() const override {
        return hash_convs({&conv1_, &conv2_, &conv3_, &conv4_, &reduce_});
    }

private:
    int reduce_dim_;
    int high_dim_;
    ConvW conv1_, conv2_, conv3_, conv4_, reduce_;
};

// Dilated VGG-16 provider for real-data runs: pools after blocks 1-3 only
// (stride 8), block 5 dilated by 2; mid = 1x1-reduced concat of block-3 and
// block-4 outputs, high = block-5 output. Weights come from a checkpoint
// container produced offline; everything stays frozen.
class Vgg16Backbone final : public Backbone {
public:
    explicit Vgg16Backbone(const ModelConfig& cfg) : reduce_dim_(cfg.reduce_dim) {
        if (cfg.stride != 8) throw SpecError("vgg16 backbone supports stride 8 only");
        if (cfg.weights.empty()) throw SpecError("vgg16 backbone needs model.weights");
        const Archive a = Archive::load(cfg.weights);
        static const struct {
            const char* name;
            int cin, cout, dilation;
        } defs[] = {
            {"conv1_1", 3, 64, 1},    {"conv1_2", 64, 64, 1},   {"conv2_1", 64, 128, 1},
            {"conv2_2", 128, 128, 1}, {"conv3_1", 128, 256, 1}, {"conv3_2", 256, 256, 1},
            {"conv3_3", 256, 256, 1}, {"conv4_1", 256, 512, 1}, {"conv4_2", 512, 512, 1},
            {"conv4_3", 512, 512, 1}, {"conv5_1", 512, 512, 2}, {"conv5_2", 512, 512, 2},
            {"conv5_3", 512, 512, 2},
        };
        for (const auto& d : defs) {
            ConvW cw;
            cw.cin = d.cin;
            cw.cout = d.cout;
            cw.k = 3;
            cw.stride = 1;
            cw.padding = d.dilation;
            cw.dilation = d.dilation;
            cw.w = a.f64(std::string(d.name) + ".weight");
            cw.b = a.f64(std::string(d.name) + ".bias");
            if (cw.w.size() != static_cast<size_t>(d.cout) * d.cin * 9 ||
                cw.b.size() != static_cast<size_t>(d.cout))
                throw DataError(std::string("vgg16 weights: bad shape for ") + d.name);
            convs_.push_back(std::move(cw));
        }
        if (a.has("reduce.weight")) {
            reduce_.w = a.f64("reduce.weight");
            reduce_.b = a.f64("reduce.bias");
            if (reduce_.w.size() != static_cast<size_t>(reduce_dim_) * 768)
                throw DataError("vgg16 weights: reduce.weight shape mismatch");
        } else {
            // frozen seeded reduction when the weights file carries none
            Rng rng(derive_seed(static_cast<std::uint64_t>(cfg.backbone_seed), 0x5eed));
            reduce_.w = nn::he_init(rng, 768, reduce_dim_ * 768);
            reduce_.b.assign(reduce_dim_, 0.0);
        }
        reduce_.cin = 768;
        reduce_.cout = reduce_dim_;
        reduce_.k = 1;
        reduce_.stride = 1;
        reduce_.padding = 0;
        reduce_.dilation = 1;
    }

    FeatureBundle extract(const ImageU8& img) const override {
        if (img.width < 32 || img.height < 32)
            throw SizeError("image below vgg16 backbone minimum 32x32");
        Map x = normalize_image(img, kImagenetMean, kImagenetStd);
        int i = 0;
        auto run = [&](int n) {
            for (int j = 0; j < n; ++j) x = conv_relu(x, convs_[i++]);
        };
        run(2);
        x = maxpool2_ceil(x);
        run(2);
        x = maxpool2_ceil(x);
        run(3);
        x = maxpool2_ceil(x);
        const Map stage3 = x;
        run(3);
        const Map stage4 = x;
        run(3);
        const Map& stage5 = x;
        const Map mid = conv_relu(concat_maps(stage3, stage4), reduce_);
        FeatureBundle fb;
        fb.mid = Tensor::constant({mid.c, mid.h, mid.w}, mid.v);
        fb.high = Tensor::constant({stage5.c, stage5.h, stage5.w}, stage5.v);
        fb.stride = 8;
        return fb;
    }

    int stride() const override { return 8; }
    int mid_dim() const override { return reduce_dim_; }
    int high_dim() const override { return 512; }
    std::uint64_t weight_hash() const override {
        std::vector<const ConvW*> all;
        for (const auto& c : convs_) all.push_back(&c);
        all.push_back(&reduce_);
        return hash_convs(all);
    }

private:
    int reduce_dim_;
    std::vector<ConvW> convs_;
    ConvW reduce_;
};

}  // namespace

std::unique_ptr<Backbone> make_backbone(const ModelConfig& cfg) {
    if (cfg.backbone == "tiny") return std::make_unique<TinyBackbone>(cfg);
    if (cfg.backbone == "vgg16") return std::make_unique<Vgg16Backbone>(cfg);
    throw SpecError("unknown backbone '" + cfg.backbone + "'; valid: tiny, vgg16");
}

Tensor image_to_tensor(const ImageU8& img, const double mean[3], const double stddev[3]) {
    Map x = normalize_image(img, mean, stddev);
    return Tensor::constant({x.c, x.h, x.w}, x.v);
}

std::vector<double> downsample_mask_max(const std::vector<double>& mask, int H, int W, int h, int w) {
    if (static_cast<int>(mask.size()) != H * W) throw ShapeError("downsample_mask_max: size mismatch");
    if (h < 1 || w < 1 || h > H || w > W) throw ShapeError("downsample_mask_max: bad target size");
    std::vector<double> out(static_cast<size_t>(h) * w, 0.0);
    for (int i = 0; i < h; ++i) {
        const int y0 = (i * H) / h, y1 = ((i + 1) * H + h - 1) / h;
        for (int j = 0; j < w; ++j) {
            const int x0 = (j * W) / w, x1 = ((j + 1) * W + w - 1) / w;
            double m = 0.0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) m = std::max(m, mask[static_cast<size_t>(y) * W + x]);
            out[static_cast<size_t>(i) * w + j] = m;
        }
    }
    return out;
}

Tensor masked_average_pool(const Tensor& f, const std::vector<double>& mask) {
    return ops::masked_avg_pool(f, mask);
}

}  // namespace dmnet
