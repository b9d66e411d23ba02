#include "dmnet/data/index.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dmnet/error.hpp"

namespace dmnet {

namespace {

namespace fs = std::filesystem;

std::vector<double> binarize(const MaskU8& m, int class_id) {
    std::vector<double> out(m.pixels.size(), 0.0);
    for (size_t i = 0; i < m.pixels.size(); ++i)
        if (m.pixels[i] == class_id) out[i] = 1.0;
    return out;
}

int count_fg(const std::vector<double>& m) {
    int n = 0;
    for (double v : m) n += v > 0.0 ? 1 : 0;
    return n;
}

struct CropRect {
    int x = 0, y = 0, size = 0;
};

// Random crop that keeps >= 1 target pixel; up to 20 draws then give up.
bool find_crop(Rng& rng, const MaskU8& mask, int class_id, int size, CropRect& out) {
    const int max_x = mask.width - size, max_y = mask.height - size;
    if (max_x < 0 || max_y < 0) return false;
    for (int attempt = 0; attempt < 20; ++attempt) {
        const int x = max_x == 0 ? 0 : rng.next_int(0, max_x);
        const int y = max_y == 0 ? 0 : rng.next_int(0, max_y);
        for (int yy = y; yy < y + size; ++yy)
            for (int xx = x; xx < x + size; ++xx)
                if (mask.at(yy, xx) == class_id) {
                    out = {x, y, size};
                    return true;
                }
    }
    return false;
}

ImageU8 crop_image(const ImageU8& img, const CropRect& r) {
    ImageU8 out;
    out.width = out.height = r.size;
    out.pixels.resize(static_cast<size_t>(r.size) * r.size * 3);
    for (int y = 0; y < r.size; ++y)
        for (int x = 0; x < r.size; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(r.y + y, r.x + x, c);
    return out;
}

MaskU8 crop_mask(const MaskU8& m, const CropRect& r) {
    MaskU8 out;
    out.width = out.height = r.size;
    out.pixels.resize(static_cast<size_t>(r.size) * r.size);
    for (int y = 0; y < r.size; ++y)
        for (int x = 0; x < r.size; ++x) out.at(y, x) = m.at(r.y + y, r.x + x);
    return out;
}

}  // namespace

EpisodeIndex EpisodeIndex::build(const std::string& dataset_root, const FoldSpec& fold, Split split) {
    EpisodeIndex idx;
    idx.split_ = split;
    idx.fold_ = fold;
    idx.root_ = dataset_root;

    const fs::path mask_dir = fs::path(dataset_root) / "masks";
    if (!fs::is_directory(mask_dir))
        throw DataError("dataset root has no masks/ directory: " + dataset_root);

    std::vector<std::string> ids;
    for (const auto& e : fs::directory_iterator(mask_dir)) {
        if (!e.is_regular_file() || e.path().extension() != ".png") continue;
        ids.push_back(e.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());

    const auto& wanted = split == Split::train ? fold.training_classes : fold.testing_classes;
    for (const auto& id : ids) {
        const MaskU8 mask = read_mask_png((mask_dir / (id + ".png")).string());
        std::set<int> present(mask.pixels.begin(), mask.pixels.end());
        present.erase(0);
        if (split == Split::train) {
            bool leaks = false;
            for (int c : present) leaks = leaks || fold.is_testing_class(c);
            if (leaks) continue;
        }
        for (int c : wanted)
            if (present.count(c)) idx.by_class_[c].push_back(id);
    }

    for (int c : wanted) {
        auto it = idx.by_class_.find(c);
        if (it == idx.by_class_.end() || it->second.empty())
            throw DataError("no images of class '" + fold.name_of(c) + "' in " +
                            (split == Split::train ? std::string("train") : std::string("test")) +
                            " split of " + dataset_root);
        idx.classes_.push_back(c);
    }
    return idx;
}

const std::vector<std::string>& EpisodeIndex::images_of(int class_id) const {
    auto it = by_class_.find(class_id);
    if (it == by_class_.end())
        throw IndexError("class id " + std::to_string(class_id) + " not in this index");
    return it->second;
}

int EpisodeIndex::n_entries() const {
    int n = 0;
    for (const auto& [_, v] : by_class_) n += static_cast<int>(v.size());
    return n;
}

Episode EpisodeIndex::make_episode(const std::string& query_id,
                                   const std::vector<std::string>& support_ids, int class_id,
                                   int crop_size, Rng* crop_rng) const {
    Episode ep;
    ep.target_class = class_id;
    ep.query_id = query_id;
    ep.support_ids = support_ids;

    auto load = [&](const std::string& id, ImageU8& img, std::vector<double>& bin) {
        img = read_image_png((fs::path(root_) / "images" / (id + ".png")).string());
        MaskU8 mask = read_mask_png((fs::path(root_) / "masks" / (id + ".png")).string());
        if (mask.width != img.width || mask.height != img.height)
            throw DataError("mask/image size mismatch for " + id);
        if (crop_size > 0 && (img.width > crop_size || img.height > crop_size)) {
            if (!crop_rng) throw SamplingError("crop requested without an rng");
            CropRect r;
            if (!find_crop(*crop_rng, mask, class_id, crop_size, r))
                throw SamplingError("no crop containing class " + std::to_string(class_id) +
                                    " found in " + id);
            img = crop_image(img, r);
            mask = crop_mask(mask, r);
        }
        bin = binarize(mask, class_id);
        if (count_fg(bin) == 0)
            throw SamplingError("image " + id + " has no pixels of class " + std::to_string(class_id));
    };

    load(query_id, ep.query_image, ep.query_mask);
    ep.height = ep.query_image.height;
    ep.width = ep.query_image.width;
    for (const auto& sid : support_ids) {
        ImageU8 img;
        std::vector<double> bin;
        load(sid, img, bin);
        if (img.width != ep.width || img.height != ep.height)
            throw DataError("support/query size mismatch: " + sid + " vs " + query_id);
        ep.support_images.push_back(std::move(img));
        ep.support_masks.push_back(std::move(bin));
    }
    return ep;
}

Episode EpisodeIndex::sample_episode(int k, Rng& rng, int crop_size) const {
    if (k < 1) throw SamplingError("k must be >= 1");
    if (classes_.empty()) throw SamplingError("empty episode index");

    const int class_id = classes_[rng.next_below(classes_.size())];
    const auto& imgs = images_of(class_id);
    if (static_cast<int>(imgs.size()) < k + 1)
        throw SamplingError("class '" + fold_.name_of(class_id) + "' has " +
                            std::to_string(imgs.size()) + " images; needs k+1 = " +
                            std::to_string(k + 1));

    // draw k+1 distinct indices: query first, then supports
    std::vector<int> picked;
    while (static_cast<int>(picked.size()) < k + 1) {
        const int i = static_cast<int>(rng.next_below(imgs.size()));
        if (std::find(picked.begin(), picked.end(), i) == picked.end()) picked.push_back(i);
    }
    std::vector<std::string> support_ids;
    for (int j = 1; j <= k; ++j) support_ids.push_back(imgs[picked[j]]);
    return make_episode(imgs[picked[0]], support_ids, class_id, crop_size, &rng);
}

std::vector<PairLine> make_pair_list(const EpisodeIndex& index, int n_pairs, int k,
                                     std::uint64_t seed) {
    std::vector<PairLine> out;
    const std::uint64_t base = derive_seed(seed, 0xfa17);
    std::vector<int> classes;
    for (int c : index.classes())
        if (static_cast<int>(index.images_of(c).size()) >= k + 1) classes.push_back(c);
    if (classes.empty())
        throw SamplingError("no class has the k+1 = " + std::to_string(k + 1) +
                            " images needed for evaluation pairs");
    for (int i = 0; i < n_pairs; ++i) {
        // one rng per pair, so lists that differ only in k share the same
        // class/query sequence and k-shot comparisons are paired
        Rng rng(derive_seed(base, static_cast<std::uint64_t>(i)));
        const int class_id = classes[rng.next_below(classes.size())];
        const auto& imgs = index.images_of(class_id);
        std::vector<int> picked;
        while (static_cast<int>(picked.size()) < k + 1) {
            const int j = static_cast<int>(rng.next_below(imgs.size()));
            if (std::find(picked.begin(), picked.end(), j) == picked.end()) picked.push_back(j);
        }
        PairLine p;
        p.query_id = imgs[picked[0]];
        for (int j = 1; j <= k; ++j) p.support_ids.push_back(imgs[picked[j]]);
        p.class_id = class_id;
        out.push_back(std::move(p));
    }
    return out;
}

void write_pair_list(const std::string& path, const std::vector<PairLine>& pairs) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot create pair list: " + path);
    for (const auto& p : pairs) {
        out << p.query_id;
        for (const auto& s : p.support_ids) out << "," << s;
        out << "," << p.class_id << "\n";
    }
}

std::vector<PairLine> read_pair_list(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open pair list: " + path);
    std::vector<PairLine> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> parts;
        std::istringstream ls(line);
        std::string item;
        while (std::getline(ls, item, ',')) parts.push_back(item);
        if (parts.size() < 3)
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": expected query,support...,class_id");
        PairLine p;
        p.query_id = parts.front();
        for (size_t i = 1; i + 1 < parts.size(); ++i) p.support_ids.push_back(parts[i]);
        try {
            p.class_id = std::stoi(parts.back());
        } catch (const std::exception&) {
            throw DataError(path + ":" + std::to_string(lineno) + ": bad class id");
        }
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace dmnet
