#include "dmnet/nn.hpp"

#include <cmath>

#include "dmnet/error.hpp"
#include "dmnet/ops.hpp"

namespace dmnet::nn {

Tensor ParamStore::add(const std::string& name, Tensor t) {
    if (index_.count(name)) throw Error("duplicate parameter name: " + name);
    index_[name] = static_cast<int>(items_.size());
    items_.emplace_back(name, t);
    return t;
}

Tensor ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("unknown parameter name: " + name);
    return items_[it->second].second;
}

std::vector<Tensor> ParamStore::tensors() const {
    std::vector<Tensor> out;
    out.reserve(items_.size());
    for (const auto& [_, t] : items_) out.push_back(t);
    return out;
}

void ParamStore::zero_grad() {
    for (auto& [_, t] : items_) t.zero_grad();
}

int ParamStore::total_numel() const {
    int n = 0;
    for (const auto& [_, t] : items_) n += t.numel();
    return n;
}

std::vector<double> he_init(Rng& rng, int fan_in, int n) {
    const double std = std::sqrt(2.0 / fan_in);
    std::vector<double> v(n);
    for (double& x : v) x = rng.next_normal() * std;
    return v;
}

Conv2d Conv2d::create(ParamStore& ps, const std::string& name, int cin, int cout, int k,
                      int stride, int padding, int dilation, bool with_bias, Rng& rng) {
    Conv2d c;
    c.stride = stride;
    c.padding = padding;
    c.dilation = dilation;
    c.weight = ps.add(name + ".weight",
                      Tensor::param({cout, cin, k, k}, he_init(rng, cin * k * k, cout * cin * k * k)));
    if (with_bias)
        c.bias = ps.add(name + ".bias", Tensor::param({cout}, std::vector<double>(cout, 0.0)));
    return c;
}

Tensor Conv2d::forward(const Tensor& x) const {
    return ops::conv2d(x, weight, bias, stride, padding, dilation);
}

Sgd::Sgd(std::vector<Tensor> params, SgdConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    velocity_.reserve(params_.size());
    for (const auto& p : params_) velocity_.emplace_back(p.numel(), 0.0);
}

double Sgd::lr_at(int iter) const {
    const double frac = 1.0 - static_cast<double>(iter) / cfg_.max_iter;
    return cfg_.lr * std::pow(frac < 0.0 ? 0.0 : frac, cfg_.poly_power);
}

void Sgd::step(int iter) {
    const double lr = lr_at(iter);
    for (size_t k = 0; k < params_.size(); ++k) {
        Tensor& p = params_[k];
        if (p.grad().empty()) continue;  // parameter untouched by this tape
        auto& v = velocity_[k];
        auto& val = p.values();
        const auto& g = p.grad();
        for (int i = 0; i < p.numel(); ++i) {
            v[i] = cfg_.momentum * v[i] + g[i] + cfg_.weight_decay * val[i];
            val[i] -= lr * v[i];
        }
    }
}

}  // namespace dmnet::nn
