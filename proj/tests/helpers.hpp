#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dmnet/rng.hpp"
#include "dmnet/tensor.hpp"

namespace testutil {

inline std::vector<double> random_values(dmnet::Rng& rng, int n, double lo = -1.0,
                                         double hi = 1.0) {
    std::vector<double> v(static_cast<size_t>(n));
    for (auto& x : v) x = rng.next_range(lo, hi);
    return v;
}

inline dmnet::Tensor random_tensor(dmnet::Rng& rng, dmnet::Shape shape, double lo = -1.0,
                                   double hi = 1.0) {
    const int n = dmnet::numel_of(shape);
    return dmnet::Tensor::constant(std::move(shape), random_values(rng, n, lo, hi));
}

inline dmnet::Tensor random_param(dmnet::Rng& rng, dmnet::Shape shape, double lo = -1.0,
                                  double hi = 1.0) {
    const int n = dmnet::numel_of(shape);
    return dmnet::Tensor::param(std::move(shape), random_values(rng, n, lo, hi));
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = std::abs(static_cast<double>(a.size()) - static_cast<double>(b.size())) * 1e9;
    for (size_t i = 0; i < std::min(a.size(), b.size()); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Central finite differences against the analytic gradient of a scalar loss.
// `loss_fn` must rebuild the graph from the parameter's current values.
// Checks every element up to 64, a strided subset beyond. Returns the worst
// relative error.
inline double gradient_check(dmnet::Tensor param,
                             const std::function<dmnet::Tensor()>& loss_fn,
                             double step = 1e-5) {
    param.zero_grad();
    const dmnet::Tensor loss = loss_fn();
    loss.backward();
    const std::vector<double> analytic = param.grad();

    std::vector<int> idx;
    const int n = param.numel();
    if (n <= 64)
        for (int i = 0; i < n; ++i) idx.push_back(i);
    else
        for (int i = 0; i < 16; ++i) idx.push_back(static_cast<int>(
            (static_cast<std::int64_t>(i) * n) / 16));

    double worst = 0.0;
    for (int i : idx) {
        const double saved = param.values()[i];
        param.values()[i] = saved + step;
        const double up = loss_fn().item();
        param.values()[i] = saved - step;
        const double down = loss_fn().item();
        param.values()[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max({1e-8, std::abs(analytic[i]), std::abs(numeric)});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

// Unique scratch directory, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("dmnet_" + tag + "_" + std::to_string(++counter) + "_" +
                std::to_string(static_cast<unsigned>(::getpid())));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string str() const { return path.string(); }
};

#ifndef DMNET_REPO_DIR
#define DMNET_REPO_DIR "."
#endif

// Absolute path of a file shipped with the repository (fold specs, configs).
inline std::string repo_path(const std::string& rel) {
    return std::string(DMNET_REPO_DIR) + "/" + rel;
}

inline const char* kSyntheticFoldText =
    "classes = disk, ring, triangle, rectangle, cross, star, ellipse, lshape\n"
    "[fold 0]\n"
    "train = disk, ring, triangle, rectangle, cross, star\n"
    "test = ellipse, lshape\n";

}  // namespace testutil
