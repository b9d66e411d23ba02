#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dmnet/error.hpp"

namespace dmnet {

using Shape = std::vector<int>;

inline int numel_of(const Shape& s) {
    int n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

// One node of the reverse-mode tape. `backprop` pulls this node's grad into
// its parents' grads; the tape is rebuilt per episode while parameter nodes
// persist across episodes.
struct TensorNode {
    std::vector<double> value;
    std::vector<double> grad;
    Shape shape;
    bool requires_grad = false;
    bool is_param = false;
    std::vector<NodePtr> parents;
    std::function<void(TensorNode&)> backprop;

    int numel() const { return static_cast<int>(value.size()); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

// Value-semantics handle to a tape node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr n) : node_(std::move(n)) {}

    static Tensor constant(Shape shape, std::vector<double> data);
    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double v);
    static Tensor scalar(double v) { return constant({1}, {v}); }
    // Learnable parameter: requires grad, persists across tapes.
    static Tensor param(Shape shape, std::vector<double> data);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int numel() const { return node_->numel(); }
    int dim(int i) const { return node_->shape[i]; }

    const std::vector<double>& values() const { return node_->value; }
    std::vector<double>& values() { return node_->value; }
    double value_at(int i) const { return node_->value[i]; }
    double item() const { return node_->value[0]; }

    const std::vector<double>& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    bool is_param() const { return node_->is_param; }

    void zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

    // Reverse-mode sweep from a scalar output. Non-parameter grads are
    // cleared first; parameter grads accumulate until zero_grad().
    void backward() const;

    NodePtr node() const { return node_; }

    // Detached copy: same values, no history.
    Tensor detach() const { return constant(node_->shape, node_->value); }

private:
    NodePtr node_;
};

// FNV-1a over the raw value bytes; used for frozen-parameter checks.
std::uint64_t value_hash(const Tensor& t);
std::uint64_t bytes_hash(const void* data, std::size_t n, std::uint64_t seed = 1469598103934665603ULL);

void check_finite(const Tensor& t, const std::string& context);

}  // namespace dmnet
