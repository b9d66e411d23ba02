#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dmnet/data/index.hpp"
#include "dmnet/model.hpp"

namespace dmnet {

struct IouCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;
};

// Exact pixel counts for one binary prediction against ground truth.
IouCounts accumulate_iou(const std::vector<std::uint8_t>& pred,
                         const std::vector<std::uint8_t>& gt);

// Foreground decision: probability strictly above one half.
std::vector<std::uint8_t> binarize_fg(const std::vector<double>& fg_prob);

struct ClassMetric {
    int class_id = 0;
    std::string name;
    double iou = 0.0;  // percentage
    double acc = 0.0;  // percentage
    int n_pairs = 0;
};

struct PairRecord {
    int class_id = 0;
    std::string query_id;
    double iou = 0.0;          // percentage, this pair alone
    double fg_fraction = 0.0;  // target size: ground-truth foreground share of the query
};

struct MetricsReport {
    int fold = 0;
    std::string split;
    int k = 1;
    int n_pairs = 0;      // requested
    int n_evaluated = 0;  // pairs that produced a prediction
    std::uint64_t seed = 0;
    std::vector<ClassMetric> classes;
    double miou = 0.0;    // percentages
    double fb_iou = 0.0;
    double macc = 0.0;
    std::vector<PairRecord> pairs;
    std::vector<std::string> warnings;

    std::string to_text() const;  // key = value lines
    std::string to_json() const;  // includes the per-pair records
    static MetricsReport from_json(const std::string& text);
};

// Full-resolution foreground probability for one episode.
using Predictor = std::function<std::vector<double>(const Episode&)>;

Predictor model_predictor(Model& model);

// Fixed-pair evaluation: per-class IoU from counts accumulated over all
// pairs of the class, FB-IoU pooled over every pair, mAcc as the mean
// per-class pixel accuracy. Classes with fewer than k+1 images and pairs
// whose episode fails are skipped with a recorded warning.
MetricsReport evaluate_fold(const Predictor& predictor, const EpisodeIndex& index, int n_pairs,
                            int k, std::uint64_t seed);

}  // namespace dmnet
