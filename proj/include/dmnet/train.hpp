#pragma once

#include <cstdint>
#include <functional>

#include "dmnet/data/index.hpp"
#include "dmnet/model.hpp"

namespace dmnet {

struct TrainStats {
    int iterations = 0;          // gradient iterations executed
    int skipped_by_warmup = 0;   // iterations whose step the warm-up gate blocked
    double final_loss = 0.0;     // batch loss of the last iteration
    std::uint64_t backbone_hash_before = 0;
    std::uint64_t backbone_hash_after = 0;
};

// Called once per iteration with (iter, batch loss, learning rate).
using TrainLogger = std::function<void(int, double, double)>;

// Episodic meta-training on the index's train split. Episodes are sampled
// with k = 1; the batch loss is the mean over independent episodes. Memory
// updates run inside the forward pass; gradient steps wait for the warm-up
// gate (disabled when kms is ablated). Throws NumericalError if the loss
// leaves the finite range.
TrainStats train_model(Model& model, const EpisodeIndex& index, const TrainLogger& logger = {});

}  // namespace dmnet
