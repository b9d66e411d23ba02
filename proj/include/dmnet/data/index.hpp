#pragma once

#include <map>
#include <string>
#include <vector>

#include "dmnet/data/fold.hpp"
#include "dmnet/image.hpp"
#include "dmnet/rng.hpp"

namespace dmnet {

enum class Split { train, test };

// One few-shot task: K support image/mask pairs plus a query, all containing
// the target class. Masks are binarized to the target class, row-major {0,1}.
struct Episode {
    int target_class = 0;
    int height = 0;
    int width = 0;
    std::vector<std::string> support_ids;
    std::vector<ImageU8> support_images;
    std::vector<std::vector<double>> support_masks;
    std::string query_id;
    ImageU8 query_image;
    std::vector<double> query_mask;  // hidden from the model in test mode
};

// Scan of a dataset root, restricted to one split of a fold. Train-split
// indexes drop every image that contains any testing-class pixel.
class EpisodeIndex {
public:
    static EpisodeIndex build(const std::string& dataset_root, const FoldSpec& fold, Split split);

    Split split() const { return split_; }
    bool leakage_filtered() const { return split_ == Split::train; }
    const FoldSpec& fold() const { return fold_; }
    const std::string& root() const { return root_; }
    const std::vector<int>& classes() const { return classes_; }
    const std::vector<std::string>& images_of(int class_id) const;
    int n_entries() const;

    // Uniform class choice, then k+1 distinct images of that class.
    Episode sample_episode(int k, Rng& rng, int crop_size = 0) const;
    // Deterministic episode from explicit ids (pair-list evaluation).
    Episode make_episode(const std::string& query_id, const std::vector<std::string>& support_ids,
                         int class_id, int crop_size = 0, Rng* crop_rng = nullptr) const;

private:
    Split split_ = Split::train;
    FoldSpec fold_;
    std::string root_;
    std::vector<int> classes_;                          // classes with >= 1 image
    std::map<int, std::vector<std::string>> by_class_;  // class id -> sorted image ids
};

struct PairLine {
    std::string query_id;
    std::vector<std::string> support_ids;
    int class_id = 0;
};

// The fixed support-query pairs used for evaluation, materialized so a run
// is exactly repeatable. Repeated query images are allowed; classes with
// fewer than k+1 images are left out (SamplingError if none qualifies).
std::vector<PairLine> make_pair_list(const EpisodeIndex& index, int n_pairs, int k, std::uint64_t seed);
void write_pair_list(const std::string& path, const std::vector<PairLine>& pairs);
std::vector<PairLine> read_pair_list(const std::string& path);

}  // namespace dmnet
