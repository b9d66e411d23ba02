#include "dmnet/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "dmnet/error.hpp"
#include "dmnet/image.hpp"
#include "dmnet/rng.hpp"

namespace dmnet {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct Instance {
    int class_id;       // 1-based
    double cx, cy;      // center, pixels
    double scale;       // jitter factor applied to the base radius
    double radius;      // pixels
    double rotation;    // radians
    double hue;         // degrees
    double sat, val;
    int area = 0;       // visible pixels after occlusion
};

// Membership test in the shape's local unit frame, |x|,|y| <= ~1.
bool inside_shape(int class_id, double x, double y) {
    const double r2 = x * x + y * y;
    switch (class_id) {
        case 1:  // disk
            return r2 <= 1.0;
        case 2:  // ring
            return r2 <= 1.0 && r2 >= 0.55 * 0.55;
        case 3: {  // triangle (equilateral, circumradius 1, apex up)
            const double yy = -y;  // raster y grows downward
            if (yy < -0.5 || yy > 1.0) return false;
            return std::abs(x) <= (1.0 - yy) / std::sqrt(3.0);
        }
        case 4:  // rectangle
            return std::abs(x) <= 1.0 && std::abs(y) <= 0.6;
        case 5:  // cross
            return (std::abs(x) <= 0.33 && std::abs(y) <= 1.0) ||
                   (std::abs(y) <= 0.33 && std::abs(x) <= 1.0);
        case 6: {  // five-pointed star
            if (r2 > 1.0) return false;
            const double ang = std::atan2(-y, x);
            // angular distance to the nearest outer point
            const double period = 2.0 * M_PI / 5.0;
            double a = std::fmod(ang - M_PI / 2.0, period);
            if (a < 0) a += period;
            const double t = std::abs(a - period / 2.0) / (period / 2.0);  // 1 at point, 0 between
            const double rmax = 0.45 + (1.0 - 0.45) * t;
            return r2 <= rmax * rmax;
        }
        case 7:  // ellipse
            return x * x + (y / 0.55) * (y / 0.55) <= 1.0;
        case 8:  // L-shape: square minus its top-right quadrant block
            return std::abs(x) <= 1.0 && std::abs(y) <= 1.0 && !(x > -0.1 && y < 0.1);
        default:
            throw IndexError("unknown shape class id " + std::to_string(class_id));
    }
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    h = std::fmod(std::fmod(h, 360.0) + 360.0, 360.0) / 60.0;
    const int i = static_cast<int>(h);
    const double f = h - i;
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (i % 6) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

std::uint8_t to_byte(double v) {
    const int x = static_cast<int>(std::lround(v * 255.0));
    return static_cast<std::uint8_t>(std::clamp(x, 0, 255));
}

struct RenderedImage {
    ImageU8 image;
    MaskU8 mask;
    std::vector<Instance> instances;
};

// One attempt at drawing an image; fails (returns false) if any shape ends
// up nearly invisible after occlusion.
bool render_attempt(const SyntheticSpec& spec, Rng& rng, RenderedImage& out) {
    const int sz = spec.image_size;
    const int n_classes = static_cast<int>(spec.classes.size());
    const int n_shapes = rng.next_int(spec.shapes_min, std::min(spec.shapes_max, n_classes));

    // distinct classes per image so multi-class coexistence is structural
    std::vector<int> ids(n_classes);
    for (int i = 0; i < n_classes; ++i) ids[i] = i + 1;
    for (int i = n_classes - 1; i > 0; --i)
        std::swap(ids[i], ids[rng.next_int(0, i)]);
    ids.resize(n_shapes);

    const double base_radius = sz * 0.14;
    std::vector<Instance> inst;
    for (int id : ids) {
        Instance s;
        s.class_id = id;
        s.scale = rng.next_range(spec.scale_min, spec.scale_max);
        s.radius = base_radius * s.scale;
        const double margin = s.radius * 1.25 + 1.0;
        const double lo = std::min(margin, sz / 2.0);
        s.cx = rng.next_range(lo, sz - lo);
        s.cy = rng.next_range(lo, sz - lo);
        s.rotation = rng.next_range(0.0, 2.0 * M_PI);
        // hue family per class, jittered; keeps appearance class-consistent
        s.hue = (id - 1) * 45.0 + rng.next_range(-18.0, 18.0);
        s.sat = rng.next_range(0.55, 0.95);
        s.val = rng.next_range(0.55, 0.95);
        inst.push_back(s);
    }

    // background: soft two-corner gradient of a dim random color
    const double bg_hue = rng.next_range(0.0, 360.0);
    double bgr, bgg, bgb;
    hsv_to_rgb(bg_hue, 0.15, 0.25, bgr, bgg, bgb);
    const double gx = rng.next_range(-0.1, 0.1), gy = rng.next_range(-0.1, 0.1);

    out.image.width = out.image.height = sz;
    out.image.pixels.assign(static_cast<size_t>(sz) * sz * 3, 0);
    out.mask.width = out.mask.height = sz;
    out.mask.pixels.assign(static_cast<size_t>(sz) * sz, 0);

    std::vector<double> fill(static_cast<size_t>(sz) * sz * 3);
    std::vector<int> owner(static_cast<size_t>(sz) * sz, -1);
    for (int y = 0; y < sz; ++y)
        for (int x = 0; x < sz; ++x) {
            const size_t p = static_cast<size_t>(y) * sz + x;
            fill[p * 3 + 0] = bgr + gx * (x - sz / 2.0) / sz;
            fill[p * 3 + 1] = bgg + gy * (y - sz / 2.0) / sz;
            fill[p * 3 + 2] = bgb + gx * (y - sz / 2.0) / sz;
        }

    // later shapes overdraw earlier ones
    for (size_t k = 0; k < inst.size(); ++k) {
        Instance& s = inst[k];
        double r, g, b;
        hsv_to_rgb(s.hue, s.sat, s.val, r, g, b);
        const double cosr = std::cos(s.rotation), sinr = std::sin(s.rotation);
        const int x0 = std::max(0, static_cast<int>(s.cx - s.radius * 1.6));
        const int x1 = std::min(sz - 1, static_cast<int>(s.cx + s.radius * 1.6));
        const int y0 = std::max(0, static_cast<int>(s.cy - s.radius * 1.6));
        const int y1 = std::min(sz - 1, static_cast<int>(s.cy + s.radius * 1.6));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double dx = (x + 0.5 - s.cx) / s.radius;
                const double dy = (y + 0.5 - s.cy) / s.radius;
                const double lx = cosr * dx + sinr * dy;
                const double ly = -sinr * dx + cosr * dy;
                if (!inside_shape(s.class_id, lx, ly)) continue;
                const size_t p = static_cast<size_t>(y) * sz + x;
                fill[p * 3 + 0] = r;
                fill[p * 3 + 1] = g;
                fill[p * 3 + 2] = b;
                owner[p] = static_cast<int>(k);
            }
    }

    for (size_t p = 0; p < owner.size(); ++p)
        if (owner[p] >= 0) {
            inst[owner[p]].area++;
            out.mask.pixels[p] = static_cast<std::uint8_t>(inst[owner[p]].class_id);
        }

    // reject renders where occlusion nearly erased a shape
    for (const Instance& s : inst)
        if (s.area < 20) return false;

    // light pixel noise on top of everything
    for (size_t p = 0; p < fill.size(); ++p)
        out.image.pixels[p] = to_byte(fill[p] + rng.next_range(-0.03, 0.03));

    out.instances = std::move(inst);
    return true;
}

std::string image_id(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "img_%05d", i);
    return buf;
}

}  // namespace

const std::vector<std::string>& synthetic_class_names() {
    static const std::vector<std::string> names = {"disk",  "ring", "triangle", "rectangle",
                                                   "cross", "star", "ellipse",  "lshape"};
    return names;
}

SyntheticSpec synthetic_spec_from_config(const DataConfig& cfg) {
    const auto& all = synthetic_class_names();
    if (cfg.classes < 2 || cfg.classes > static_cast<int>(all.size()))
        throw SpecError("data.classes must be in [2, " + std::to_string(all.size()) + "]");
    SyntheticSpec spec;
    spec.classes.assign(all.begin(), all.begin() + cfg.classes);
    spec.n_images = cfg.n_images;
    spec.image_size = cfg.image_size;
    spec.shapes_min = cfg.shapes_min;
    spec.shapes_max = cfg.shapes_max;
    spec.scale_min = cfg.scale_min;
    spec.scale_max = cfg.scale_max;
    spec.seed = static_cast<std::uint64_t>(cfg.seed);
    return spec;
}

GenReport generate_synthetic_dataset(const std::string& root, const SyntheticSpec& spec) {
    if (spec.n_images < 1) throw SpecError("synthetic spec: n_images must be >= 1");
    if (spec.image_size < 16) throw SpecError("synthetic spec: image_size must be >= 16");
    if (spec.shapes_min < 2 || spec.shapes_max < spec.shapes_min)
        throw SpecError("synthetic spec: need shapes_max >= shapes_min >= 2");
    if (spec.classes.size() < 2) throw SpecError("synthetic spec: need >= 2 classes");
    if (!(spec.scale_min > 0.0) || spec.scale_max < spec.scale_min)
        throw SpecError("synthetic spec: bad scale range");

    GenReport report;
    if (spec.n_images < static_cast<int>(spec.classes.size()) * 10)
        report.warnings.push_back("n_images < classes x 10; episodes may be unsamplable at k=5");

    fs::create_directories(fs::path(root) / "images");
    fs::create_directories(fs::path(root) / "masks");

    json meta;
    meta["classes"] = spec.classes;
    meta["image_size"] = spec.image_size;
    meta["n_images"] = spec.n_images;
    meta["seed"] = spec.seed;
    meta["images"] = json::array();

    for (int i = 0; i < spec.n_images; ++i) {
        RenderedImage ri;
        bool ok = false;
        for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
            Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(i), attempt));
            ok = render_attempt(spec, rng, ri);
        }
        if (!ok) throw DataError("synthetic generator: image " + std::to_string(i) +
                                 " failed to render after 64 attempts");
        const std::string id = image_id(i);
        write_image_png((fs::path(root) / "images" / (id + ".png")).string(), ri.image);
        write_mask_png((fs::path(root) / "masks" / (id + ".png")).string(), ri.mask);

        json entry;
        entry["id"] = id;
        json shapes = json::array();
        for (const auto& s : ri.instances) {
            json js;
            js["class_id"] = s.class_id;
            js["class"] = spec.classes[s.class_id - 1];
            js["cx"] = s.cx;
            js["cy"] = s.cy;
            js["scale"] = s.scale;
            js["rotation"] = s.rotation;
            js["area"] = s.area;
            shapes.push_back(js);
        }
        entry["shapes"] = shapes;
        meta["images"].push_back(entry);
    }

    std::ofstream mf(fs::path(root) / "metadata.json", std::ios::binary | std::ios::trunc);
    if (!mf) throw DataError("cannot write metadata.json under " + root);
    mf << meta.dump(2) << "\n";

    report.n_images = spec.n_images;
    return report;
}

}  // namespace dmnet
