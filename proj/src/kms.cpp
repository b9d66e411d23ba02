#include "dmnet/kms.hpp"

#include <cmath>

#include "dmnet/error.hpp"

namespace dmnet {

namespace {

// Dense cosine of every pixel of a (C,h,w) map against a C-vector; cosine
// with a zero vector is 0. Plain doubles: suppression never carries grads.
std::vector<double> cosine_row(const Tensor& f, const double* p, int c, int hw) {
    constexpr double kTiny = 1e-12;
    double pn2 = 0.0;
    for (int ch = 0; ch < c; ++ch) pn2 += p[ch] * p[ch];
    const double pn = std::sqrt(pn2);
    std::vector<double> out(hw, 0.0);
    if (pn < kTiny) return out;
    const auto& v = f.values();
    for (int i = 0; i < hw; ++i) {
        double dot = 0.0, fn2 = 0.0;
        for (int ch = 0; ch < c; ++ch) {
            const double x = v[static_cast<size_t>(ch) * hw + i];
            dot += x * p[ch];
            fn2 += x * x;
        }
        const double fn = std::sqrt(fn2);
        out[i] = fn < kTiny ? 0.0 : dot / (fn * pn);
    }
    return out;
}

// Argmax competition over similarity channels; pixels where `retained` wins
// keep that channel's similarity rescaled from [-1,1] to [0,1], others zero.
std::vector<double> argmax_keep(const std::vector<std::vector<double>>& maps, int retained, int hw) {
    std::vector<double> out(hw, 0.0);
    for (int i = 0; i < hw; ++i) {
        int best = 0;
        for (size_t k = 1; k < maps.size(); ++k)
            if (maps[k][i] > maps[best][i]) best = static_cast<int>(k);  // ties keep lowest index
        if (best == retained) out[i] = (maps[retained][i] + 1.0) / 2.0;
    }
    return out;
}

}  // namespace

MetaMemory MetaMemory::create(int n, int channels, double rho) {
    if (n < 1 || channels < 1) throw SpecError("meta memory needs n >= 1 and channels >= 1");
    MetaMemory m;
    m.n = n;
    m.channels = channels;
    m.rho = rho;
    m.w_f.assign(static_cast<size_t>(n) * channels, 0.0);
    m.w_b.assign(static_cast<size_t>(n) * channels, 0.0);
    m.init_flag.assign(n, 0);
    m.update_count.assign(n, 0);
    return m;
}

bool MetaMemory::initialized(int slot) const {
    if (slot < 0 || slot >= n) throw IndexError("memory slot " + std::to_string(slot) + " out of range");
    return init_flag[slot] != 0;
}

void MetaMemory::update(int slot, const std::vector<double>& p_f, const std::vector<double>& p_b) {
    if (slot < 0 || slot >= n) throw IndexError("memory slot " + std::to_string(slot) + " out of range");
    if (static_cast<int>(p_f.size()) != channels || static_cast<int>(p_b.size()) != channels)
        throw ShapeError("memory update: prototype width mismatch");
    double* f = w_f.data() + static_cast<size_t>(slot) * channels;
    double* b = w_b.data() + static_cast<size_t>(slot) * channels;
    if (!init_flag[slot]) {
        for (int i = 0; i < channels; ++i) {
            f[i] = p_f[i];
            b[i] = p_b[i];
        }
        init_flag[slot] = 1;
    } else {
        for (int i = 0; i < channels; ++i) {
            f[i] = rho * f[i] + (1.0 - rho) * p_f[i];
            b[i] = rho * b[i] + (1.0 - rho) * p_b[i];
        }
    }
    update_count[slot]++;
}

void MetaMemory::save_into(Archive& a, const std::string& prefix) const {
    a.put_f64(prefix + ".w_f", {n, channels}, w_f);
    a.put_f64(prefix + ".w_b", {n, channels}, w_b);
    std::vector<std::int64_t> flags(init_flag.begin(), init_flag.end());
    a.put_i64(prefix + ".init_flag", flags);
    a.put_i64(prefix + ".update_count", update_count);
    a.put_f64(prefix + ".rho", {1}, {rho});
}

MetaMemory MetaMemory::load_from(const Archive& a, const std::string& prefix) {
    const Shape& s = a.shape_of(prefix + ".w_f");
    if (s.size() != 2) throw DataError("meta memory: bad shape");
    MetaMemory m = create(s[0], s[1], a.f64(prefix + ".rho")[0]);
    m.w_f = a.f64(prefix + ".w_f");
    m.w_b = a.f64(prefix + ".w_b");
    const auto& flags = a.i64(prefix + ".init_flag");
    const auto& counts = a.i64(prefix + ".update_count");
    if (static_cast<int>(flags.size()) != m.n || static_cast<int>(counts.size()) != m.n)
        throw DataError("meta memory: flag/count length mismatch");
    m.init_flag.assign(flags.begin(), flags.end());
    m.update_count = counts;
    return m;
}

bool warmup_gate(int iteration, int iters_per_epoch, double lambda_warm) {
    if (iters_per_epoch <= 0) throw SpecError("warmup_gate: iters_per_epoch must be > 0");
    const long long boundary = std::llround(lambda_warm * iters_per_epoch);
    return iteration >= boundary;
}

std::vector<double> suppress_train(const Tensor& f_q_high, const MetaMemory& memory,
                                   int target_slot) {
    const int c = f_q_high.dim(0), hw = f_q_high.dim(1) * f_q_high.dim(2);
    if (c != memory.channels) throw ShapeError("suppress_train: channel width mismatch");
    if (!memory.initialized(target_slot)) return std::vector<double>(hw, 0.5);

    std::vector<std::vector<double>> maps;
    maps.push_back(cosine_row(f_q_high, memory.bg_row(target_slot), c, hw));  // 0: target bg
    maps.push_back(cosine_row(f_q_high, memory.fg_row(target_slot), c, hw));  // 1: target fg
    for (int j = 0; j < memory.n; ++j) {
        if (j == target_slot || !memory.init_flag[j]) continue;
        maps.push_back(cosine_row(f_q_high, memory.fg_row(j), c, hw));
    }
    return argmax_keep(maps, 1, hw);
}

std::vector<double> suppress_test(const Tensor& f_q_high, const std::vector<double>& p_f_high,
                                  const std::vector<double>& p_b_high, const MetaMemory& memory) {
    const int c = f_q_high.dim(0), hw = f_q_high.dim(1) * f_q_high.dim(2);
    if (static_cast<int>(p_f_high.size()) != c || static_cast<int>(p_b_high.size()) != c)
        throw ShapeError("suppress_test: prototype width mismatch");
    if (c != memory.channels) throw ShapeError("suppress_test: channel width mismatch");

    std::vector<std::vector<double>> maps;
    maps.push_back(cosine_row(f_q_high, p_f_high.data(), c, hw));  // 0: support fg (retained)
    maps.push_back(cosine_row(f_q_high, p_b_high.data(), c, hw));  // 1: support bg
    for (int j = 0; j < memory.n; ++j) {
        if (!memory.init_flag[j]) continue;
        maps.push_back(cosine_row(f_q_high, memory.fg_row(j), c, hw));
    }
    return argmax_keep(maps, 0, hw);
}

}  // namespace dmnet
