#include "dmnet/tensor.hpp"

#include <cmath>
#include <cstring>
#include <unordered_set>

namespace dmnet {

Tensor Tensor::constant(Shape shape, std::vector<double> data) {
    auto n = std::make_shared<TensorNode>();
    if (static_cast<int>(data.size()) != numel_of(shape))
        throw ShapeError("constant: data size " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    n->shape = std::move(shape);
    n->value = std::move(data);
    return Tensor(n);
}

Tensor Tensor::zeros(Shape shape) {
    auto n = std::make_shared<TensorNode>();
    n->value.assign(numel_of(shape), 0.0);
    n->shape = std::move(shape);
    return Tensor(n);
}

Tensor Tensor::full(Shape shape, double v) {
    auto n = std::make_shared<TensorNode>();
    n->value.assign(numel_of(shape), v);
    n->shape = std::move(shape);
    return Tensor(n);
}

Tensor Tensor::param(Shape shape, std::vector<double> data) {
    Tensor t = constant(std::move(shape), std::move(data));
    t.node()->requires_grad = true;
    t.node()->is_param = true;
    t.node()->ensure_grad();
    return t;
}

void Tensor::backward() const {
    if (!node_) throw Error("backward on empty tensor");
    if (node_->numel() != 1) throw ShapeError("backward requires a scalar output");

    // Topological order by iterative DFS.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<std::pair<TensorNode*, size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->parents.size()) {
            TensorNode* p = n->parents[idx++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    // Fresh grads for tape-local nodes, keep accumulated parameter grads.
    for (TensorNode* n : order) {
        if (n->is_param)
            n->ensure_grad();
        else
            n->grad.assign(n->value.size(), 0.0);
    }
    node_->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (n->backprop) n->backprop(*n);
    }
}

std::uint64_t bytes_hash(const void* data, std::size_t n, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t value_hash(const Tensor& t) {
    return bytes_hash(t.values().data(), t.values().size() * sizeof(double));
}

void check_finite(const Tensor& t, const std::string& context) {
    for (double v : t.values())
        if (!std::isfinite(v)) throw NumericalError(context + ": non-finite entry");
}

}  // namespace dmnet
