#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmnet/config.hpp"

namespace dmnet {

struct SyntheticSpec {
    std::vector<std::string> classes;  // names in id order (1-based ids in masks)
    int n_images = 400;
    int image_size = 64;
    int shapes_min = 2;  // distinct-class shapes per image
    int shapes_max = 3;
    double scale_min = 0.5;  // per-instance size jitter
    double scale_max = 2.0;
    std::uint64_t seed = 0;
};

struct GenReport {
    int n_images = 0;
    std::vector<std::string> warnings;
};

// The canonical eight shape classes, in id order.
const std::vector<std::string>& synthetic_class_names();

SyntheticSpec synthetic_spec_from_config(const DataConfig& cfg);

// Writes root/images/<id>.png, root/masks/<id>.png and root/metadata.json.
// Regeneration with the same spec is byte-identical.
GenReport generate_synthetic_dataset(const std::string& root, const SyntheticSpec& spec);

}  // namespace dmnet
