#include "dmnet/ops.hpp"

#include <algorithm>
#include <cmath>

namespace dmnet::ops {

namespace {

Tensor make(Shape shape, std::vector<double> value, const std::vector<Tensor>& parents,
            std::function<void(TensorNode&)> fn) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    bool rg = false;
    for (const auto& p : parents) {
        n->parents.push_back(p.node());
        rg = rg || p.node()->requires_grad;
    }
    n->requires_grad = rg;
    if (rg) n->backprop = std::move(fn);
    return Tensor(n);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

void accum(TensorNode* p, const std::vector<double>& g) {
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) p->grad[i] += g[i];
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> v(a.numel());
    for (int i = 0; i < a.numel(); ++i) v[i] = a.values()[i] + b.values()[i];
    return make(a.shape(), std::move(v), {a, b}, [](TensorNode& out) {
        accum(out.parents[0].get(), out.grad);
        accum(out.parents[1].get(), out.grad);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> v(a.numel());
    for (int i = 0; i < a.numel(); ++i) v[i] = a.values()[i] - b.values()[i];
    return make(a.shape(), std::move(v), {a, b}, [](TensorNode& out) {
        accum(out.parents[0].get(), out.grad);
        TensorNode* p = out.parents[1].get();
        if (p->requires_grad) {
            p->ensure_grad();
            for (size_t i = 0; i < out.grad.size(); ++i) p->grad[i] -= out.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> v(a.numel());
    for (int i = 0; i < a.numel(); ++i) v[i] = a.values()[i] * b.values()[i];
    return make(a.shape(), std::move(v), {a, b}, [](TensorNode& out) {
        TensorNode* pa = out.parents[0].get();
        TensorNode* pb = out.parents[1].get();
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < out.grad.size(); ++i) pa->grad[i] += out.grad[i] * pb->value[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < out.grad.size(); ++i) pb->grad[i] += out.grad[i] * pa->value[i];
        }
    });
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> v(a.numel());
    for (int i = 0; i < a.numel(); ++i) v[i] = a.values()[i] * c;
    return make(a.shape(), std::move(v), {a}, [c](TensorNode& out) {
        TensorNode* p = out.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (size_t i = 0; i < out.grad.size(); ++i) p->grad[i] += out.grad[i] * c;
    });
}

Tensor scale_by(const Tensor& s, const Tensor& a) {
    if (s.numel() != 1) throw ShapeError("scale_by: scale must be scalar");
    const double sv = s.item();
    std::vector<double> v(a.numel());
    for (int i = 0; i < a.numel(); ++i) v[i] = a.values()[i] * sv;
    return make(a.shape(), std::move(v), {s, a}, [](TensorNode& out) {
        TensorNode* ps = out.parents[0].get();
        TensorNode* pa = out.parents[1].get();
        if (ps->requires_grad) {
            ps->ensure_grad();
            double g = 0.0;
            for (size_t i = 0; i < out.grad.size(); ++i) g += out.grad[i] * pa->value[i];
            ps->grad[0] += g;
        }
        if (pa->requires_grad) {
            pa->ensure_grad();
            const double sv2 = ps->value[0];
            for (size_t i = 0; i < out.grad.size(); ++i) pa->grad[i] += out.grad[i] * sv2;
        }
    });
}

Tensor relu(const Tensor& a) {
    std::vector<double> v(a.numel());
    for (int i = 0; i < a.numel(); ++i) v[i] = a.values()[i] > 0.0 ? a.values()[i] : 0.0;
    return make(a.shape(), std::move(v), {a}, [](TensorNode& out) {
        TensorNode* p = out.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (size_t i = 0; i < out.grad.size(); ++i)
            if (p->value[i] > 0.0) p->grad[i] += out.grad[i];
    });
}

Tensor add_n(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw ShapeError("add_n: empty input");
    Tensor acc = xs[0];
    for (size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
    return acc;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> v(static_cast<size_t>(m) * n, 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            const double apv = av[i * k + p];
            if (apv == 0.0) continue;
            for (int j = 0; j < n; ++j) v[i * n + j] += apv * bv[p * n + j];
        }
    return make({m, n}, std::move(v), {a, b}, [m, k, n](TensorNode& out) {
        TensorNode* pa = out.parents[0].get();
        TensorNode* pb = out.parents[1].get();
        if (pa->requires_grad) {
            pa->ensure_grad();  // dA = dOut * B^T
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double g = out.grad[i * n + j];
                    if (g == 0.0) continue;
                    for (int p = 0; p < k; ++p) pa->grad[i * k + p] += g * pb->value[p * n + j];
                }
        }
        if (pb->requires_grad) {
            pb->ensure_grad();  // dB = A^T * dOut
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                    const double av2 = pa->value[i * k + p];
                    if (av2 == 0.0) continue;
                    for (int j = 0; j < n; ++j) pb->grad[p * n + j] += av2 * out.grad[i * n + j];
                }
        }
    });
}

Tensor transpose(const Tensor& a) {
    if (a.shape().size() != 2) throw ShapeError("transpose: expects 2-D");
    const int m = a.dim(0), n = a.dim(1);
    std::vector<double> v(static_cast<size_t>(m) * n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) v[j * m + i] = a.values()[i * n + j];
    return make({n, m}, std::move(v), {a}, [m, n](TensorNode& out) {
        TensorNode* p = out.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) p->grad[i * n + j] += out.grad[j * m + i];
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (numel_of(shape) != a.numel())
        throw ShapeError("reshape: numel mismatch " + shape_str(a.shape()) + " -> " + shape_str(shape));
    return make(std::move(shape), a.values(), {a}, [](TensorNode& out) {
        accum(out.parents[0].get(), out.grad);
    });
}

namespace {

// softmax over contiguous groups defined by (index -> group, slot).
// rows: group = row; cols: group = column.
Tensor softmax_generic(const Tensor& a, bool by_rows) {
    if (a.shape().size() != 2) throw ShapeError("softmax: expects 2-D");
    const int m = a.dim(0), n = a.dim(1);
    const int groups = by_rows ? m : n;
    const int len = by_rows ? n : m;
    auto at = [by_rows, n](int g, int s) { return by_rows ? g * n + s : s * n + g; };
    std::vector<double> v(a.numel());
    for (int g = 0; g < groups; ++g) {
        double mx = -1e300;
        for (int s = 0; s < len; ++s) mx = std::max(mx, a.values()[at(g, s)]);
        double z = 0.0;
        for (int s = 0; s < len; ++s) z += std::exp(a.values()[at(g, s)] - mx);
        for (int s = 0; s < len; ++s) v[at(g, s)] = std::exp(a.values()[at(g, s)] - mx) / z;
    }
    return make(a.shape(), std::move(v), {a}, [groups, len, at](TensorNode& out) {
        TensorNode* p = out.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (int g = 0; g < groups; ++g) {
            double dot = 0.0;
            for (int s = 0; s < len; ++s) dot += out.grad[at(g, s)] * out.value[at(g, s)];
            for (int s = 0; s < len; ++s) {
                const int i = at(g, s);
                p->grad[i] += out.value[i] * (out.grad[i] - dot);
            }
        }
    });
}

}  // namespace

Tensor softmax_rows(const Tensor& a) { return softmax_generic(a, true); }
Tensor softmax_cols(const Tensor& a) { return softmax_generic(a, false); }

Tensor softmax_axis0(const Tensor& a) {
    if (a.shape().size() < 2) throw ShapeError("softmax_axis0: expects >= 2-D");
    const int k = a.dim(0);
    const int rest = a.numel() / k;
    std::vector<double> v(a.numel());
    for (int j = 0; j < rest; ++j) {
        double mx = -1e300;
        for (int c = 0; c < k; ++c) mx = std::max(mx, a.values()[c * rest + j]);
        double z = 0.0;
        for (int c = 0; c < k; ++c) z += std::exp(a.values()[c * rest + j] - mx);
        for (int c = 0; c < k; ++c) v[c * rest + j] = std::exp(a.values()[c * rest + j] - mx) / z;
    }
    return make(a.shape(), std::move(v), {a}, [k, rest](TensorNode& out) {
        TensorNode* p = out.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (int j = 0; j < rest; ++j) {
            double dot = 0.0;
            for (int c = 0; c < k; ++c) dot += out.grad[c * rest + j] * out.value[c * rest + j];
            for (int c = 0; c < k; ++c) {
                const int i = c * rest + j;
                p->grad[i] += out.value[i] * (out.grad[i] - dot);
            }
        }
    });
}

Tensor softmax_vec(const Tensor& a) {
    if (a.shape().size() != 1) throw ShapeError("softmax_vec: expects 1-D");
    return reshape(softmax_rows(reshape(a, {1, a.numel()})), {a.numel()});
}

Tensor row_mean(const Tensor& a) {
    if (a.shape().size() != 2) throw ShapeError("row_mean: expects 2-D");
    const int m = a.dim(0), n = a.dim(1);
    std::vector<double> v(m, 0.0);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) v[i] += a.values()[i * n + j];
        v[i] /= n;
    }
    return make({m}, std::move(v), {a}, [m, n](TensorNode& out) {
        TensorNode* p = out.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) p->grad[i * n + j] += out.grad[i] / n;
    });
}

Tensor mean_all(const Tensor& a) {
    const int n = a.numel();
    double s = 0.0;
    for (double x : a.values()) s += x;
    return make({1}, {s / n}, {a}, [n](TensorNode& out) {
        TensorNode* p = out.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (int i = 0; i < n; ++i) p->grad[i] += out.grad[0] / n;
    });
}

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double x : a.values()) s += x;
    return make({1}, {s}, {a}, [](TensorNode& out) {
        TensorNode* p = out.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += out.grad[0];
    });
}

Tensor minmax_norm(const Tensor& a, double degenerate) {
    const int n = a.numel();
    int imin = 0, imax = 0;
    for (int i = 1; i < n; ++i) {
        if (a.values()[i] < a.values()[imin]) imin = i;
        if (a.values()[i] > a.values()[imax]) imax = i;
    }
    const double mn = a.values()[imin], mx = a.values()[imax];
    const double d = mx - mn;
    if (d < 1e-12) {
        // constant input: no contrast to normalize, emit a flat neutral map
        return make(a.shape(), std::vector<double>(n, degenerate), {a}, [](TensorNode&) {});
    }
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = (a.values()[i] - mn) / d;
    return make(a.shape(), std::move(v), {a}, [n, imin, imax, mn, mx, d](TensorNode& out) {
        TensorNode* p = out.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (int i = 0; i < n; ++i) {
            const double g = out.grad[i];
            if (g == 0.0) continue;
            p->grad[i] += g / d;
            p->grad[imin] += g * (p->value[i] - mx) / (d * d);
            p->grad[imax] -= g * (p->value[i] - mn) / (d * d);
        }
    });
}

Tensor channel(const Tensor& a, int k) {
    if (a.shape().size() != 3) throw ShapeError("channel: expects 3-D");
    const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
    if (k < 0 || k >= c) throw ShapeError("channel: index out of range");
    std::vector<double> v(a.values().begin() + static_cast<size_t>(k) * h * w,
                          a.values().begin() + static_cast<size_t>(k + 1) * h * w);
    return make({h, w}, std::move(v), {a}, [k, h, w](TensorNode& out) {
        TensorNode* p = out.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (int i = 0; i < h * w; ++i) p->grad[k * h * w + i] += out.grad[i];
    });
}

Tensor stack0(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw ShapeError("stack0: empty input");
    const Shape inner = xs[0].shape();
    const int step = xs[0].numel();
    std::vector<double> v;
    v.reserve(static_cast<size_t>(step) * xs.size());
    for (const auto& x : xs) {
        require_same_shape(x, xs[0], "stack0");
        v.insert(v.end(), x.values().begin(), x.values().end());
    }
    Shape shape{static_cast<int>(xs.size())};
    shape.insert(shape.end(), inner.begin(), inner.end());
    return make(std::move(shape), std::move(v), xs, [step](TensorNode& out) {
        for (size_t k = 0; k < out.parents.size(); ++k) {
            TensorNode* p = out.parents[k].get();
            if (!p->requires_grad) continue;
            p->ensure_grad();
            for (int i = 0; i < step; ++i) p->grad[i] += out.grad[k * step + i];
        }
    });
}

Tensor concat_ch(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw ShapeError("concat_ch: empty input");
    const int h = xs[0].dim(1), w = xs[0].dim(2);
    int ctotal = 0;
    std::vector<double> v;
    for (const auto& x : xs) {
        if (x.shape().size() != 3 || x.dim(1) != h || x.dim(2) != w)
            throw ShapeError("concat_ch: spatial mismatch");
        ctotal += x.dim(0);
        v.insert(v.end(), x.values().begin(), x.values().end());
    }
    return make({ctotal, h, w}, std::move(v), xs, [](TensorNode& out) {
        size_t off = 0;
        for (auto& pp : out.parents) {
            TensorNode* p = pp.get();
            if (p->requires_grad) {
                p->ensure_grad();
                for (size_t i = 0; i < p->value.size(); ++i) p->grad[i] += out.grad[off + i];
            }
            off += p->value.size();
        }
    });
}

Tensor broadcast_vec(const Tensor& v, int h, int w) {
    if (v.shape().size() != 1) throw ShapeError("broadcast_vec: expects 1-D");
    const int c = v.dim(0);
    std::vector<double> out(static_cast<size_t>(c) * h * w);
    for (int ch = 0; ch < c; ++ch)
        std::fill(out.begin() + static_cast<size_t>(ch) * h * w,
                  out.begin() + static_cast<size_t>(ch + 1) * h * w, v.values()[ch]);
    return make({c, h, w}, std::move(out), {v}, [c, h, w](TensorNode& o) {
        TensorNode* p = o.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (int ch = 0; ch < c; ++ch) {
            double g = 0.0;
            for (int i = 0; i < h * w; ++i) g += o.grad[ch * h * w + i];
            p->grad[ch] += g;
        }
    });
}

Tensor lincomb(const std::vector<Tensor>& xs, const Tensor& w) {
    if (xs.empty() || w.numel() != static_cast<int>(xs.size()))
        throw ShapeError("lincomb: weight count mismatch");
    const int n = xs[0].numel();
    std::vector<double> v(n, 0.0);
    for (size_t j = 0; j < xs.size(); ++j) {
        require_same_shape(xs[j], xs[0], "lincomb");
        const double wj = w.values()[j];
        for (int i = 0; i < n; ++i) v[i] += wj * xs[j].values()[i];
    }
    std::vector<Tensor> parents = xs;
    parents.push_back(w);
    const size_t k = xs.size();
    return make(xs[0].shape(), std::move(v), parents, [k, n](TensorNode& out) {
        TensorNode* pw = out.parents[k].get();
        for (size_t j = 0; j < k; ++j) {
            TensorNode* px = out.parents[j].get();
            const double wj = pw->value[j];
            if (px->requires_grad) {
                px->ensure_grad();
                for (int i = 0; i < n; ++i) px->grad[i] += wj * out.grad[i];
            }
            if (pw->requires_grad) {
                pw->ensure_grad();
                double g = 0.0;
                for (int i = 0; i < n; ++i) g += px->value[i] * out.grad[i];
                pw->grad[j] += g;
            }
        }
    });
}

Tensor mul_mask(const Tensor& x, const std::vector<double>& mask) {
    if (x.shape().size() != 3) throw ShapeError("mul_mask: expects 3-D");
    const int c = x.dim(0), hw = x.dim(1) * x.dim(2);
    if (static_cast<int>(mask.size()) != hw) throw ShapeError("mul_mask: mask size mismatch");
    std::vector<double> v(x.numel());
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < hw; ++i) v[ch * hw + i] = x.values()[ch * hw + i] * mask[i];
    return make(x.shape(), std::move(v), {x}, [c, hw, mask](TensorNode& out) {
        TensorNode* p = out.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (int ch = 0; ch < c; ++ch)
            for (int i = 0; i < hw; ++i) p->grad[ch * hw + i] += out.grad[ch * hw + i] * mask[i];
    });
}

Tensor masked_avg_pool(const Tensor& x, const std::vector<double>& mask) {
    if (x.shape().size() != 3) throw ShapeError("masked_avg_pool: expects 3-D");
    const int c = x.dim(0), hw = x.dim(1) * x.dim(2);
    if (static_cast<int>(mask.size()) != hw) throw ShapeError("masked_avg_pool: mask size mismatch");
    double total = 0.0;
    for (double m : mask) total += m;
    if (total <= 0.0) throw EmptyMaskError("masked_avg_pool: all-zero mask");
    std::vector<double> v(c, 0.0);
    for (int ch = 0; ch < c; ++ch) {
        for (int i = 0; i < hw; ++i) v[ch] += x.values()[ch * hw + i] * mask[i];
        v[ch] /= total;
    }
    return make({c}, std::move(v), {x}, [c, hw, mask, total](TensorNode& out) {
        TensorNode* p = out.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (int ch = 0; ch < c; ++ch) {
            const double g = out.grad[ch] / total;
            for (int i = 0; i < hw; ++i) p->grad[ch * hw + i] += g * mask[i];
        }
    });
}

Tensor cosine_map(const Tensor& x, const Tensor& p) {
    if (x.shape().size() != 3 || p.shape().size() != 1 || x.dim(0) != p.dim(0))
        throw ShapeError("cosine_map: expects (C,h,w) and (C)");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2), hw = h * w;
    constexpr double kTiny = 1e-12;
    double pn2 = 0.0;
    for (int ch = 0; ch < c; ++ch) pn2 += p.values()[ch] * p.values()[ch];
    const double pn = std::sqrt(pn2);
    std::vector<double> v(hw, 0.0);
    for (int i = 0; i < hw; ++i) {
        double dot = 0.0, fn2 = 0.0;
        for (int ch = 0; ch < c; ++ch) {
            const double f = x.values()[ch * hw + i];
            dot += f * p.values()[ch];
            fn2 += f * f;
        }
        const double fn = std::sqrt(fn2);
        v[i] = (fn < kTiny || pn < kTiny) ? 0.0 : dot / (fn * pn);
    }
    return make({h, w}, std::move(v), {x, p}, [c, hw, pn](TensorNode& out) {
        TensorNode* px = out.parents[0].get();
        TensorNode* pp = out.parents[1].get();
        constexpr double kTiny2 = 1e-12;
        if (pn < kTiny2) return;
        for (int i = 0; i < hw; ++i) {
            const double g = out.grad[i];
            if (g == 0.0) continue;
            double fn2 = 0.0;
            for (int ch = 0; ch < c; ++ch) {
                const double f = px->value[ch * hw + i];
                fn2 += f * f;
            }
            const double fn = std::sqrt(fn2);
            if (fn < kTiny2) continue;
            const double cosv = out.value[i];
            if (px->requires_grad) {
                px->ensure_grad();
                for (int ch = 0; ch < c; ++ch) {
                    const double f = px->value[ch * hw + i];
                    px->grad[ch * hw + i] += g * (pp->value[ch] / (fn * pn) - cosv * f / fn2);
                }
            }
            if (pp->requires_grad) {
                pp->ensure_grad();
                for (int ch = 0; ch < c; ++ch) {
                    const double f = px->value[ch * hw + i];
                    pp->grad[ch] += g * (f / (fn * pn) - cosv * pp->value[ch] / (pn * pn));
                }
            }
        }
    });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding,
              int dilation) {
    if (x.shape().size() != 3 || w.shape().size() != 4 || x.dim(0) != w.dim(1))
        throw ShapeError("conv2d: expects (Cin,H,W) and (Cout,Cin,kh,kw)");
    const int cin = x.dim(0), hin = x.dim(1), win = x.dim(2);
    const int cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const bool has_bias = b.defined();
    if (has_bias && (b.shape().size() != 1 || b.dim(0) != cout))
        throw ShapeError("conv2d: bias shape mismatch");
    const int hout = (hin + 2 * padding - dilation * (kh - 1) - 1) / stride + 1;
    const int wout = (win + 2 * padding - dilation * (kw - 1) - 1) / stride + 1;
    if (hout <= 0 || wout <= 0) throw ShapeError("conv2d: output would be empty");

    std::vector<double> v(static_cast<size_t>(cout) * hout * wout, 0.0);
    const auto& xv = x.values();
    const auto& wv = w.values();
    for (int oc = 0; oc < cout; ++oc) {
        const double bias = has_bias ? b.values()[oc] : 0.0;
        for (int oy = 0; oy < hout; ++oy)
            for (int ox = 0; ox < wout; ++ox) {
                double s = bias;
                for (int ic = 0; ic < cin; ++ic)
                    for (int ky = 0; ky < kh; ++ky) {
                        const int iy = oy * stride - padding + ky * dilation;
                        if (iy < 0 || iy >= hin) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int ix = ox * stride - padding + kx * dilation;
                            if (ix < 0 || ix >= win) continue;
                            s += wv[((oc * cin + ic) * kh + ky) * kw + kx] *
                                 xv[(ic * hin + iy) * win + ix];
                        }
                    }
                v[(oc * static_cast<size_t>(hout) + oy) * wout + ox] = s;
            }
    }
    std::vector<Tensor> parents{x, w};
    if (has_bias) parents.push_back(b);
    return make({cout, hout, wout}, std::move(v), parents,
                [cin, hin, win, cout, kh, kw, hout, wout, stride, padding, dilation,
                 has_bias](TensorNode& out) {
                    TensorNode* px = out.parents[0].get();
                    TensorNode* pw = out.parents[1].get();
                    TensorNode* pb = has_bias ? out.parents[2].get() : nullptr;
                    if (px->requires_grad) px->ensure_grad();
                    if (pw->requires_grad) pw->ensure_grad();
                    if (pb && pb->requires_grad) pb->ensure_grad();
                    for (int oc = 0; oc < cout; ++oc)
                        for (int oy = 0; oy < hout; ++oy)
                            for (int ox = 0; ox < wout; ++ox) {
                                const double g = out.grad[(oc * static_cast<size_t>(hout) + oy) * wout + ox];
                                if (g == 0.0) continue;
                                if (pb && pb->requires_grad) pb->grad[oc] += g;
                                for (int ic = 0; ic < cin; ++ic)
                                    for (int ky = 0; ky < kh; ++ky) {
                                        const int iy = oy * stride - padding + ky * dilation;
                                        if (iy < 0 || iy >= hin) continue;
                                        for (int kx = 0; kx < kw; ++kx) {
                                            const int ix = ox * stride - padding + kx * dilation;
                                            if (ix < 0 || ix >= win) continue;
                                            const int wi = ((oc * cin + ic) * kh + ky) * kw + kx;
                                            const int xi = (ic * hin + iy) * win + ix;
                                            if (pw->requires_grad) pw->grad[wi] += g * px->value[xi];
                                            if (px->requires_grad) px->grad[xi] += g * pw->value[wi];
                                        }
                                    }
                            }
                });
}

Tensor upsample_bilinear(const Tensor& x, int out_h, int out_w) {
    if (x.shape().size() != 3) throw ShapeError("upsample_bilinear: expects 3-D");
    const int c = x.dim(0), hin = x.dim(1), win = x.dim(2);
    const double sy = static_cast<double>(hin) / out_h;
    const double sx = static_cast<double>(win) / out_w;
    // precompute the sample lattice (align_corners = false)
    struct Tap {
        int lo, hi;
        double w_hi;
    };
    std::vector<Tap> ty(out_h), tx(out_w);
    auto fill = [](std::vector<Tap>& taps, int out_n, double s, int in_n) {
        for (int o = 0; o < out_n; ++o) {
            double src = (o + 0.5) * s - 0.5;
            if (src < 0) src = 0;
            int lo = static_cast<int>(src);
            if (lo > in_n - 1) lo = in_n - 1;
            const int hi = std::min(lo + 1, in_n - 1);
            taps[o] = {lo, hi, src - lo};
        }
    };
    fill(ty, out_h, sy, hin);
    fill(tx, out_w, sx, win);
    std::vector<double> v(static_cast<size_t>(c) * out_h * out_w);
    for (int ch = 0; ch < c; ++ch)
        for (int oy = 0; oy < out_h; ++oy)
            for (int ox = 0; ox < out_w; ++ox) {
                const Tap& a = ty[oy];
                const Tap& bt = tx[ox];
                const double v00 = x.values()[(ch * hin + a.lo) * win + bt.lo];
                const double v01 = x.values()[(ch * hin + a.lo) * win + bt.hi];
                const double v10 = x.values()[(ch * hin + a.hi) * win + bt.lo];
                const double v11 = x.values()[(ch * hin + a.hi) * win + bt.hi];
                const double top = v00 * (1 - bt.w_hi) + v01 * bt.w_hi;
                const double bot = v10 * (1 - bt.w_hi) + v11 * bt.w_hi;
                v[(ch * static_cast<size_t>(out_h) + oy) * out_w + ox] = top * (1 - a.w_hi) + bot * a.w_hi;
            }
    return make({c, out_h, out_w}, std::move(v), {x},
                [c, hin, win, out_h, out_w, ty, tx](TensorNode& out) {
                    TensorNode* p = out.parents[0].get();
                    if (!p->requires_grad) return;
                    p->ensure_grad();
                    for (int ch = 0; ch < c; ++ch)
                        for (int oy = 0; oy < out_h; ++oy)
                            for (int ox = 0; ox < out_w; ++ox) {
                                const double g = out.grad[(ch * static_cast<size_t>(out_h) + oy) * out_w + ox];
                                if (g == 0.0) continue;
                                const auto& a = ty[oy];
                                const auto& bt = tx[ox];
                                p->grad[(ch * hin + a.lo) * win + bt.lo] += g * (1 - a.w_hi) * (1 - bt.w_hi);
                                p->grad[(ch * hin + a.lo) * win + bt.hi] += g * (1 - a.w_hi) * bt.w_hi;
                                p->grad[(ch * hin + a.hi) * win + bt.lo] += g * a.w_hi * (1 - bt.w_hi);
                                p->grad[(ch * hin + a.hi) * win + bt.hi] += g * a.w_hi * bt.w_hi;
                            }
                });
}

Tensor adaptive_pool_cols(const Tensor& a, int out_len) {
    if (a.shape().size() != 2) throw ShapeError("adaptive_pool_cols: expects 2-D");
    const int r = a.dim(0), len = a.dim(1);
    std::vector<int> starts(out_len), ends(out_len);
    for (int i = 0; i < out_len; ++i) {
        starts[i] = (i * len) / out_len;
        ends[i] = ((i + 1) * len + out_len - 1) / out_len;
    }
    std::vector<double> v(static_cast<size_t>(r) * out_len, 0.0);
    for (int row = 0; row < r; ++row)
        for (int i = 0; i < out_len; ++i) {
            double s = 0.0;
            for (int j = starts[i]; j < ends[i]; ++j) s += a.values()[row * len + j];
            v[row * out_len + i] = s / (ends[i] - starts[i]);
        }
    return make({r, out_len}, std::move(v), {a}, [r, len, out_len, starts, ends](TensorNode& out) {
        TensorNode* p = out.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (int row = 0; row < r; ++row)
            for (int i = 0; i < out_len; ++i) {
                const double g = out.grad[row * out_len + i] / (ends[i] - starts[i]);
                for (int j = starts[i]; j < ends[i]; ++j) p->grad[row * len + j] += g;
            }
    });
}

Tensor bce_fg(const Tensor& prob, const std::vector<double>& target, double eps) {
    if (prob.numel() != static_cast<int>(target.size()))
        throw ShapeError("bce_fg: target size mismatch");
    for (double t : target)
        if (t != 0.0 && t != 1.0) throw DataError("bce_fg: mask values must be 0 or 1");
    const int n = prob.numel();
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double p = std::clamp(prob.values()[i], eps, 1.0 - eps);
        loss -= target[i] * std::log(p) + (1.0 - target[i]) * std::log(1.0 - p);
    }
    return make({1}, {loss / n}, {prob}, [n, target, eps](TensorNode& out) {
        TensorNode* p = out.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        const double g = out.grad[0] / n;
        for (int i = 0; i < n; ++i) {
            const double pv = p->value[i];
            if (pv <= eps || pv >= 1.0 - eps) continue;  // clamped region is flat
            p->grad[i] += g * (-(target[i] / pv) + (1.0 - target[i]) / (1.0 - pv));
        }
    });
}

}  // namespace dmnet::ops
