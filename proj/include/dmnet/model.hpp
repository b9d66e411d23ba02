#pragma once

#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dmnet/backbone.hpp"
#include "dmnet/config.hpp"
#include "dmnet/cprm.hpp"
#include "dmnet/csrm.hpp"
#include "dmnet/data/fold.hpp"
#include "dmnet/data/index.hpp"
#include "dmnet/decoder.hpp"
#include "dmnet/kms.hpp"
#include "dmnet/kshot.hpp"

namespace dmnet {

enum class Mode { train, test };

// The full episodic network: frozen feature extraction, class-public mining,
// decoding, class-specific refinement, known-class suppression and K-shot
// fusion, wired per the ablation switches in the config.
class Model {
public:
    Model(const Config& cfg, const FoldSpec& fold);

    struct EpisodeOutput {
        SegmentationPrediction y_q;      // decoder prediction, feature grid
        SegmentationPrediction y_final;  // refined prediction, feature grid
        Tensor loss;                     // defined in train mode only
        std::vector<double> fg_prob_full;  // query-resolution foreground probability
    };

    EpisodeOutput forward_episode(const Episode& ep, Mode mode);

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    MetaMemory& memory() { return memory_; }
    const MetaMemory& memory() const { return memory_; }
    const Backbone& backbone() const { return *backbone_; }
    const Config& config() const { return cfg_; }
    const FoldSpec& fold() const { return fold_; }

    void save_checkpoint(const std::string& path) const;
    static Model load_checkpoint(const std::string& path);

    // Content-addressed cache of frozen feature bundles.
    void set_feature_cache(bool enabled);

private:
    FeatureBundle features(const ImageU8& img);

    struct BranchOut {
        Tensor f_q_agg;
        Tensor l_p;
        SegmentationPrediction y_q;
        SegmentationPrediction y_final;
        PrototypePair merged;  // defined when csrm runs
        bool has_merged = false;
    };
    BranchOut run_branch(const FeatureBundle& fq, const FeatureBundle& fs,
                         const std::vector<double>& m_s_feat, int target_class, Mode mode);

    Config cfg_;
    FoldSpec fold_;
    std::unique_ptr<Backbone> backbone_;
    nn::ParamStore params_;
    std::optional<Cprm> cprm_;
    std::optional<Decoder> decoder_;
    Csrm csrm_;
    MetaMemory memory_;
    bool cache_enabled_ = true;
    std::unordered_map<std::uint64_t, FeatureBundle> feature_cache_;
};

}  // namespace dmnet
