#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dmnet/rng.hpp"
#include "dmnet/tensor.hpp"

namespace dmnet::nn {

// Ordered registry of named learnable tensors. Order is the serialization
// order, so registration must be deterministic.
class ParamStore {
public:
    Tensor add(const std::string& name, Tensor t);
    Tensor get(const std::string& name) const;
    bool has(const std::string& name) const { return index_.count(name) != 0; }
    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
    std::vector<Tensor> tensors() const;
    void zero_grad();
    int total_numel() const;

private:
    std::vector<std::pair<std::string, Tensor>> items_;
    std::unordered_map<std::string, int> index_;
};

// He fan-in normal init values.
std::vector<double> he_init(Rng& rng, int fan_in, int n);

struct Conv2d {
    Tensor weight;  // (cout,cin,kh,kw)
    Tensor bias;    // (cout), undefined when bias-free
    int stride = 1;
    int padding = 0;
    int dilation = 1;

    static Conv2d create(ParamStore& ps, const std::string& name, int cin, int cout, int k,
                         int stride, int padding, int dilation, bool with_bias, Rng& rng);
    Tensor forward(const Tensor& x) const;
};

struct SgdConfig {
    double lr = 0.005;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double poly_power = 0.9;
    int max_iter = 1000;
};

// SGD with momentum, weight decay and the poly schedule
// lr(iter) = lr0 * (1 - iter/max_iter)^power.
class Sgd {
public:
    Sgd(std::vector<Tensor> params, SgdConfig cfg);
    double lr_at(int iter) const;
    void step(int iter);

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> velocity_;
    SgdConfig cfg_;
};

}  // namespace dmnet::nn
