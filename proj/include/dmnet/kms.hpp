#pragma once

#include <cstdint>
#include <vector>

#include "dmnet/config.hpp"
#include "dmnet/serialize.hpp"
#include "dmnet/tensor.hpp"

namespace dmnet {

// EMA prototype memory over the known (training) classes. Rows live outside
// the autograd tape: they change only through update(), never by gradients.
struct MetaMemory {
    int n = 0;        // number of known classes
    int channels = 0; // high-level feature width
    double rho = 0.5;
    std::vector<double> w_f;               // (n, channels) foreground prototypes
    std::vector<double> w_b;               // (n, channels) background prototypes
    std::vector<std::uint8_t> init_flag;   // per-row "has been written"
    std::vector<std::int64_t> update_count;

    static MetaMemory create(int n, int channels, double rho);

    // First write sets the row directly; later writes apply the EMA
    // row = rho * row + (1 - rho) * incoming.
    void update(int slot, const std::vector<double>& p_f, const std::vector<double>& p_b);

    const double* fg_row(int slot) const { return w_f.data() + static_cast<size_t>(slot) * channels; }
    const double* bg_row(int slot) const { return w_b.data() + static_cast<size_t>(slot) * channels; }
    bool initialized(int slot) const;

    void save_into(Archive& a, const std::string& prefix) const;
    static MetaMemory load_from(const Archive& a, const std::string& prefix);
};

// True once `iteration` reaches the warm-up boundary
// round(lambda_warm * iters_per_epoch); memory updates ignore this gate.
bool warmup_gate(int iteration, int iters_per_epoch, double lambda_warm);

// Training-phase meta-activation map: channels are [target background,
// target foreground, other known foregrounds...]; a pixel keeps its target
// foreground similarity (rescaled to [0,1]) only where channel 1 wins the
// argmax, ties broken to the lowest index. Uninitialized target -> all 0.5.
std::vector<double> suppress_train(const Tensor& f_q_high, const MetaMemory& memory, int target_slot);

// Test-phase map: channels are [support foreground, support background, all
// known foregrounds...]; the retained channel is index 0.
std::vector<double> suppress_test(const Tensor& f_q_high, const std::vector<double>& p_f_high,
                                  const std::vector<double>& p_b_high, const MetaMemory& memory);

}  // namespace dmnet
