// Reverse-mode autodiff core: a tape-built graph of dense row-major tensors.
// Templated on the scalar type; training runs in float, gradient checks may
// run in double (see gradcheck.hpp).
#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace choreo {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {
inline thread_local bool g_grad_enabled = true;
}

// Disables tape recording in scope; evaluation-only code paths use this.
struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(detail::g_grad_enabled) { detail::g_grad_enabled = false; }
    ~NoGradGuard() { detail::g_grad_enabled = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline bool grad_enabled() { return detail::g_grad_enabled; }

template <typename S>
struct NodeT {
    std::vector<int64_t> shape;
    std::vector<S> value;
    std::vector<S> grad;  // allocated on demand, same length as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<NodeT<S>>> parents;
    std::function<void(NodeT<S>&)> backward_op;  // reads this->grad, accumulates into parents

    int64_t size() const { return static_cast<int64_t>(value.size()); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), S(0));
    }
};

inline int64_t shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d <= 0) throw ConfigError("tensor extents must be positive");
        n *= d;
    }
    return n;
}

template <typename S>
class TensorT {
  public:
    TensorT() = default;
    explicit TensorT(std::shared_ptr<NodeT<S>> n) : n_(std::move(n)) {}

    static TensorT zeros(std::vector<int64_t> shape, bool requires_grad = false) {
        auto n = std::make_shared<NodeT<S>>();
        n->value.assign(shape_numel(shape), S(0));
        n->shape = std::move(shape);
        n->requires_grad = requires_grad;
        return TensorT(std::move(n));
    }
    static TensorT full(std::vector<int64_t> shape, S v) {
        TensorT t = zeros(std::move(shape));
        std::fill(t.data(), t.data() + t.size(), v);
        return t;
    }
    static TensorT from(std::vector<int64_t> shape, std::vector<S> values, bool requires_grad = false) {
        if (static_cast<int64_t>(values.size()) != shape_numel(shape))
            throw ConfigError("tensor data length does not match shape");
        auto n = std::make_shared<NodeT<S>>();
        n->shape = std::move(shape);
        n->value = std::move(values);
        n->requires_grad = requires_grad;
        return TensorT(std::move(n));
    }
    static TensorT scalar(S v) { return from({1}, {v}); }

    bool defined() const { return n_ != nullptr; }
    const std::vector<int64_t>& shape() const { return n_->shape; }
    int64_t dim(size_t i) const { return n_->shape.at(i); }
    size_t rank() const { return n_->shape.size(); }
    int64_t size() const { return n_->size(); }
    S* data() { return n_->value.data(); }
    const S* data() const { return n_->value.data(); }
    std::vector<S>& values() { return n_->value; }
    const std::vector<S>& values() const { return n_->value; }
    S item() const {
        if (size() != 1) throw ConfigError("item() requires a scalar tensor");
        return n_->value[0];
    }
    S at(int64_t r, int64_t c) const { return n_->value[r * n_->shape.back() + c]; }

    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool b) { n_->requires_grad = b; }
    const std::vector<S>& grad() const {
        n_->ensure_grad();
        return n_->grad;
    }
    std::vector<S>& grad_mut() {
        n_->ensure_grad();
        return n_->grad;
    }
    void zero_grad() {
        if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), S(0));
    }

    std::shared_ptr<NodeT<S>> node() const { return n_; }

    // Reverse sweep from a scalar output through the recorded tape.
    void backward() const {
        if (size() != 1) throw ConfigError("backward() requires a scalar loss");
        if (!n_->requires_grad) return;
        std::vector<NodeT<S>*> order;
        topo_order(order);
        n_->ensure_grad();
        n_->grad[0] += S(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            NodeT<S>* node = *it;
            if (node->backward_op) {
                for (auto& p : node->parents)
                    if (p->requires_grad) p->ensure_grad();
                node->backward_op(*node);
            }
        }
    }

  private:
    void topo_order(std::vector<NodeT<S>*>& order) const {
        // Iterative post-order DFS; graphs from long training steps stay shallow
        // but conv chains can exceed default stack limits if done recursively.
        std::unordered_set<const NodeT<S>*> visited;
        std::vector<std::pair<NodeT<S>*, size_t>> stack;
        stack.push_back({n_.get(), 0});
        visited.insert(n_.get());
        while (!stack.empty()) {
            auto& [node, idx] = stack.back();
            if (idx < node->parents.size()) {
                NodeT<S>* p = node->parents[idx++].get();
                if (p->requires_grad && !visited.count(p)) {
                    visited.insert(p);
                    stack.push_back({p, 0});
                }
            } else {
                order.push_back(node);
                stack.pop_back();
            }
        }
    }

    std::shared_ptr<NodeT<S>> n_;
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

namespace detail {

template <typename S>
TensorT<S> make_op(std::vector<int64_t> shape, std::vector<S> value,
                   std::vector<TensorT<S>> parents,
                   std::function<void(NodeT<S>&)> backward) {
    auto n = std::make_shared<NodeT<S>>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    bool needs = false;
    if (grad_enabled())
        for (const auto& p : parents)
            if (p.requires_grad()) needs = true;
    if (needs) {
        n->requires_grad = true;
        n->parents.reserve(parents.size());
        for (auto& p : parents) n->parents.push_back(p.node());
        n->backward_op = std::move(backward);
    }
    return TensorT<S>(std::move(n));
}

template <typename S>
void check_same_shape(const TensorT<S>& a, const TensorT<S>& b, const char* op) {
    if (a.shape() != b.shape()) throw ConfigError(std::string(op) + ": shape mismatch");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise ops
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
    detail::check_same_shape(a, b, "add");
    std::vector<S> out(a.size());
    for (int64_t i = 0; i < a.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return detail::make_op<S>(a.shape(), std::move(out), {a, b}, [](NodeT<S>& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        for (int64_t i = 0; i < n.size(); ++i) {
            if (pa.requires_grad) pa.grad[i] += n.grad[i];
            if (pb.requires_grad) pb.grad[i] += n.grad[i];
        }
    });
}

template <typename S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
    detail::check_same_shape(a, b, "sub");
    std::vector<S> out(a.size());
    for (int64_t i = 0; i < a.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    return detail::make_op<S>(a.shape(), std::move(out), {a, b}, [](NodeT<S>& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        for (int64_t i = 0; i < n.size(); ++i) {
            if (pa.requires_grad) pa.grad[i] += n.grad[i];
            if (pb.requires_grad) pb.grad[i] -= n.grad[i];
        }
    });
}

template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
    detail::check_same_shape(a, b, "mul");
    std::vector<S> out(a.size());
    for (int64_t i = 0; i < a.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    return detail::make_op<S>(a.shape(), std::move(out), {a, b}, [](NodeT<S>& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        for (int64_t i = 0; i < n.size(); ++i) {
            if (pa.requires_grad) pa.grad[i] += n.grad[i] * pb.value[i];
            if (pb.requires_grad) pb.grad[i] += n.grad[i] * pa.value[i];
        }
    });
}

template <typename S>
TensorT<S> scale(const TensorT<S>& a, S c) {
    std::vector<S> out(a.size());
    for (int64_t i = 0; i < a.size(); ++i) out[i] = a.data()[i] * c;
    return detail::make_op<S>(a.shape(), std::move(out), {a}, [c](NodeT<S>& n) {
        auto& pa = *n.parents[0];
        for (int64_t i = 0; i < n.size(); ++i) pa.grad[i] += n.grad[i] * c;
    });
}

template <typename S>
TensorT<S> add_scalar(const TensorT<S>& a, S c) {
    std::vector<S> out(a.size());
    for (int64_t i = 0; i < a.size(); ++i) out[i] = a.data()[i] + c;
    return detail::make_op<S>(a.shape(), std::move(out), {a}, [](NodeT<S>& n) {
        auto& pa = *n.parents[0];
        for (int64_t i = 0; i < n.size(); ++i) pa.grad[i] += n.grad[i];
    });
}

template <typename S>
TensorT<S> relu(const TensorT<S>& a) {
    std::vector<S> out(a.size());
    for (int64_t i = 0; i < a.size(); ++i) out[i] = a.data()[i] > S(0) ? a.data()[i] : S(0);
    return detail::make_op<S>(a.shape(), std::move(out), {a}, [](NodeT<S>& n) {
        auto& pa = *n.parents[0];
        for (int64_t i = 0; i < n.size(); ++i)
            if (pa.value[i] > S(0)) pa.grad[i] += n.grad[i];
    });
}

// tanh-form gelu, the GPT-2 variant
template <typename S>
TensorT<S> gelu(const TensorT<S>& a) {
    const S k = S(0.7978845608028654);  // sqrt(2/pi)
    const S c3 = S(0.044715);
    std::vector<S> out(a.size());
    for (int64_t i = 0; i < a.size(); ++i) {
        S x = a.data()[i];
        out[i] = S(0.5) * x * (S(1) + std::tanh(k * (x + c3 * x * x * x)));
    }
    return detail::make_op<S>(a.shape(), std::move(out), {a}, [k, c3](NodeT<S>& n) {
        auto& pa = *n.parents[0];
        for (int64_t i = 0; i < n.size(); ++i) {
            S x = pa.value[i];
            S u = k * (x + c3 * x * x * x);
            S t = std::tanh(u);
            S sech2 = S(1) - t * t;
            S d = S(0.5) * (S(1) + t) + S(0.5) * x * sech2 * k * (S(1) + S(3) * c3 * x * x);
            pa.grad[i] += n.grad[i] * d;
        }
    });
}

// Forward identity; the backward path ends here.
template <typename S>
TensorT<S> stop_gradient(const TensorT<S>& a) {
    return TensorT<S>::from(a.shape(), a.values());
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

// Reductions accumulate in double regardless of S; keeps 32-bit losses tight
// enough for finite-difference checks.
template <typename S>
TensorT<S> sum(const TensorT<S>& a) {
    double acc = 0;
    for (int64_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a.data()[i]);
    return detail::make_op<S>({1}, {static_cast<S>(acc)}, {a}, [](NodeT<S>& n) {
        auto& pa = *n.parents[0];
        for (int64_t i = 0; i < pa.size(); ++i) pa.grad[i] += n.grad[0];
    });
}

template <typename S>
TensorT<S> mean(const TensorT<S>& a) {
    double acc = 0;
    for (int64_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a.data()[i]);
    S inv = S(1) / S(a.size());
    return detail::make_op<S>({1}, {static_cast<S>(acc / static_cast<double>(a.size()))}, {a},
                              [inv](NodeT<S>& n) {
        auto& pa = *n.parents[0];
        for (int64_t i = 0; i < pa.size(); ++i) pa.grad[i] += n.grad[0] * inv;
    });
}

template <typename S>
TensorT<S> mse_loss(const TensorT<S>& a, const TensorT<S>& b) {
    detail::check_same_shape(a, b, "mse_loss");
    double acc = 0;
    for (int64_t i = 0; i < a.size(); ++i) {
        double d = static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]);
        acc += d * d;
    }
    S inv = S(1) / S(a.size());
    return detail::make_op<S>({1}, {static_cast<S>(acc / static_cast<double>(a.size()))}, {a, b},
                              [inv](NodeT<S>& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        for (int64_t i = 0; i < pa.size(); ++i) {
            S d = S(2) * inv * (pa.value[i] - pb.value[i]) * n.grad[0];
            if (pa.requires_grad) pa.grad[i] += d;
            if (pb.requires_grad) pb.grad[i] -= d;
        }
    });
}

// mean |a-b|; subgradient 0 at ties
template <typename S>
TensorT<S> l1_loss(const TensorT<S>& a, const TensorT<S>& b) {
    detail::check_same_shape(a, b, "l1_loss");
    double acc = 0;
    for (int64_t i = 0; i < a.size(); ++i)
        acc += std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]));
    S inv = S(1) / S(a.size());
    return detail::make_op<S>({1}, {static_cast<S>(acc / static_cast<double>(a.size()))}, {a, b},
                              [inv](NodeT<S>& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        for (int64_t i = 0; i < pa.size(); ++i) {
            S d = pa.value[i] - pb.value[i];
            S s = d > S(0) ? S(1) : (d < S(0) ? S(-1) : S(0));
            S g = inv * s * n.grad[0];
            if (pa.requires_grad) pa.grad[i] += g;
            if (pb.requires_grad) pb.grad[i] -= g;
        }
    });
}

// Mean over rows of the Euclidean row norm: (1/R) sum_i ||x_i||_2.
template <typename S>
TensorT<S> mean_row_norm(const TensorT<S>& x) {
    if (x.rank() != 2) throw ConfigError("mean_row_norm: expects a matrix");
    int64_t r = x.dim(0), c = x.dim(1);
    double acc = 0;
    std::vector<S> norms(r);
    for (int64_t i = 0; i < r; ++i) {
        double s = 0;
        for (int64_t j = 0; j < c; ++j)
            s += static_cast<double>(x.data()[i * c + j]) * static_cast<double>(x.data()[i * c + j]);
        norms[i] = static_cast<S>(std::sqrt(s));
        acc += std::sqrt(s);
    }
    S inv = S(1) / S(r);
    return detail::make_op<S>({1}, {static_cast<S>(acc / static_cast<double>(r))}, {x},
                              [r, c, norms, inv](NodeT<S>& n) {
        auto& px = *n.parents[0];
        for (int64_t i = 0; i < r; ++i) {
            S denom = norms[i] > S(1e-12) ? norms[i] : S(1e-12);
            for (int64_t j = 0; j < c; ++j)
                px.grad[i * c + j] += n.grad[0] * inv * px.value[i * c + j] / denom;
        }
    });
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> reshape(const TensorT<S>& a, std::vector<int64_t> shape) {
    if (shape_numel(shape) != a.size()) throw ConfigError("reshape: element count mismatch");
    return detail::make_op<S>(std::move(shape), a.values(), {a}, [](NodeT<S>& n) {
        auto& pa = *n.parents[0];
        for (int64_t i = 0; i < n.size(); ++i) pa.grad[i] += n.grad[i];
    });
}

template <typename S>
TensorT<S> transpose(const TensorT<S>& a) {
    if (a.rank() != 2) throw ConfigError("transpose: expects a matrix");
    int64_t r = a.dim(0), c = a.dim(1);
    std::vector<S> out(a.size());
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j) out[j * r + i] = a.data()[i * c + j];
    return detail::make_op<S>({c, r}, std::move(out), {a}, [r, c](NodeT<S>& n) {
        auto& pa = *n.parents[0];
        for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < c; ++j) pa.grad[i * c + j] += n.grad[j * r + i];
    });
}

template <typename S>
TensorT<S> slice_rows(const TensorT<S>& a, int64_t r0, int64_t r1) {
    if (a.rank() < 1) throw ConfigError("slice_rows: rank");
    int64_t rows = a.dim(0);
    if (r0 < 0 || r1 > rows || r0 >= r1) throw ConfigError("slice_rows: bad range");
    int64_t stride = a.size() / rows;
    std::vector<S> out(a.data() + r0 * stride, a.data() + r1 * stride);
    std::vector<int64_t> shape = a.shape();
    shape[0] = r1 - r0;
    return detail::make_op<S>(std::move(shape), std::move(out), {a}, [r0, stride](NodeT<S>& n) {
        auto& pa = *n.parents[0];
        for (int64_t i = 0; i < n.size(); ++i) pa.grad[r0 * stride + i] += n.grad[i];
    });
}

template <typename S>
TensorT<S> slice_cols(const TensorT<S>& a, int64_t c0, int64_t c1) {
    if (a.rank() != 2) throw ConfigError("slice_cols: expects a matrix");
    int64_t rows = a.dim(0), cols = a.dim(1);
    if (c0 < 0 || c1 > cols || c0 >= c1) throw ConfigError("slice_cols: bad range");
    int64_t w = c1 - c0;
    std::vector<S> out(rows * w);
    for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < w; ++j) out[i * w + j] = a.data()[i * cols + c0 + j];
    return detail::make_op<S>({rows, w}, std::move(out), {a}, [rows, cols, c0, w](NodeT<S>& n) {
        auto& pa = *n.parents[0];
        for (int64_t i = 0; i < rows; ++i)
            for (int64_t j = 0; j < w; ++j) pa.grad[i * cols + c0 + j] += n.grad[i * w + j];
    });
}

// First forward difference along rows: out_t = x_{t+1} - x_t.
template <typename S>
TensorT<S> temporal_diff(const TensorT<S>& x) {
    int64_t t = x.dim(0);
    if (t < 2) throw ConfigError("temporal_diff: need at least 2 rows");
    return sub(slice_rows(x, 1, t), slice_rows(x, 0, t - 1));
}

template <typename S>
TensorT<S> concat_rows(const std::vector<TensorT<S>>& parts) {
    if (parts.empty()) throw ConfigError("concat_rows: empty");
    std::vector<int64_t> shape = parts[0].shape();
    int64_t stride = parts[0].size() / parts[0].dim(0);
    int64_t rows = 0;
    for (const auto& p : parts) {
        auto s = p.shape();
        s[0] = shape[0];
        if (s != shape) throw ConfigError("concat_rows: trailing dims differ");
        rows += p.dim(0);
    }
    std::vector<S> out;
    out.reserve(rows * stride);
    for (const auto& p : parts) out.insert(out.end(), p.data(), p.data() + p.size());
    shape[0] = rows;
    return detail::make_op<S>(std::move(shape), std::move(out), parts, [](NodeT<S>& n) {
        int64_t off = 0;
        for (auto& p : n.parents) {
            if (p->requires_grad)
                for (int64_t i = 0; i < p->size(); ++i) p->grad[i] += n.grad[off + i];
            off += p->size();
        }
    });
}

template <typename S>
TensorT<S> concat_cols(const std::vector<TensorT<S>>& parts) {
    if (parts.empty()) throw ConfigError("concat_cols: empty");
    int64_t rows = parts[0].dim(0);
    int64_t cols = 0;
    std::vector<int64_t> widths;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.dim(0) != rows) throw ConfigError("concat_cols: row mismatch");
        widths.push_back(p.dim(1));
        cols += p.dim(1);
    }
    std::vector<S> out(rows * cols);
    int64_t off = 0;
    for (size_t k = 0; k < parts.size(); ++k) {
        int64_t w = widths[k];
        for (int64_t i = 0; i < rows; ++i)
            for (int64_t j = 0; j < w; ++j) out[i * cols + off + j] = parts[k].data()[i * w + j];
        off += w;
    }
    return detail::make_op<S>({rows, cols}, std::move(out), parts, [rows, cols, widths](NodeT<S>& n) {
        int64_t off = 0;
        for (size_t k = 0; k < n.parents.size(); ++k) {
            auto& p = *n.parents[k];
            int64_t w = widths[k];
            if (p.requires_grad)
                for (int64_t i = 0; i < rows; ++i)
                    for (int64_t j = 0; j < w; ++j) p.grad[i * w + j] += n.grad[i * cols + off + j];
            off += w;
        }
    });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

namespace detail {
// c[m x n] += a[m x k] * b[k x n]; ikj order vectorizes over n
template <typename S>
void gemm_acc(const S* a, const S* b, S* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        const S* arow = a + i * k;
        S* crow = c + i * n;
        for (int64_t p = 0; p < k; ++p) {
            S av = arow[p];
            if (av == S(0)) continue;
            const S* brow = b + p * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}
// c[m x k] += a[m x n] * b^T where b is [k x n]
template <typename S>
void gemm_nt_acc(const S* a, const S* b, S* c, int64_t m, int64_t n, int64_t k) {
    for (int64_t i = 0; i < m; ++i) {
        const S* arow = a + i * n;
        S* crow = c + i * k;
        for (int64_t p = 0; p < k; ++p) {
            const S* brow = b + p * n;
            S acc = 0;
            for (int64_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
            crow[p] += acc;
        }
    }
}
// c[k x n] += a^T * b where a is [m x k], b is [m x n]
template <typename S>
void gemm_tn_acc(const S* a, const S* b, S* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        const S* arow = a + i * k;
        const S* brow = b + i * n;
        for (int64_t p = 0; p < k; ++p) {
            S av = arow[p];
            if (av == S(0)) continue;
            S* crow = c + p * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}
}  // namespace detail

template <typename S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ConfigError("matmul: incompatible shapes");
    int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<S> out(m * n, S(0));
    detail::gemm_acc(a.data(), b.data(), out.data(), m, k, n);
    return detail::make_op<S>({m, n}, std::move(out), {a, b}, [m, k, n](NodeT<S>& nd) {
        auto& pa = *nd.parents[0];
        auto& pb = *nd.parents[1];
        if (pa.requires_grad) detail::gemm_nt_acc(nd.grad.data(), pb.value.data(), pa.grad.data(), m, n, k);
        if (pb.requires_grad) detail::gemm_tn_acc(pa.value.data(), nd.grad.data(), pb.grad.data(), m, k, n);
    });
}

// x[R x C] + v[C] broadcast over rows
template <typename S>
TensorT<S> add_rowwise(const TensorT<S>& x, const TensorT<S>& v) {
    if (x.rank() != 2 || v.rank() != 1 || v.dim(0) != x.dim(1))
        throw ConfigError("add_rowwise: incompatible shapes");
    int64_t r = x.dim(0), c = x.dim(1);
    std::vector<S> out(x.size());
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j) out[i * c + j] = x.data()[i * c + j] + v.data()[j];
    return detail::make_op<S>(x.shape(), std::move(out), {x, v}, [r, c](NodeT<S>& n) {
        auto& px = *n.parents[0];
        auto& pv = *n.parents[1];
        for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < c; ++j) {
                if (px.requires_grad) px.grad[i * c + j] += n.grad[i * c + j];
                if (pv.requires_grad) pv.grad[j] += n.grad[i * c + j];
            }
    });
}

// ---------------------------------------------------------------------------
// row-wise nonlinear maps
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> softmax_rows(const TensorT<S>& x) {
    if (x.rank() != 2) throw ConfigError("softmax_rows: expects a matrix");
    int64_t r = x.dim(0), c = x.dim(1);
    std::vector<S> out(x.size());
    for (int64_t i = 0; i < r; ++i) {
        const S* row = x.data() + i * c;
        S m = row[0];
        for (int64_t j = 1; j < c; ++j) m = std::max(m, row[j]);
        double z = 0;
        for (int64_t j = 0; j < c; ++j) {
            out[i * c + j] = std::exp(row[j] - m);
            z += static_cast<double>(out[i * c + j]);
        }
        S inv = static_cast<S>(1.0 / z);
        for (int64_t j = 0; j < c; ++j) out[i * c + j] *= inv;
    }
    return detail::make_op<S>(x.shape(), std::move(out), {x}, [r, c](NodeT<S>& n) {
        auto& px = *n.parents[0];
        for (int64_t i = 0; i < r; ++i) {
            const S* y = n.value.data() + i * c;
            const S* g = n.grad.data() + i * c;
            S dot = 0;
            for (int64_t j = 0; j < c; ++j) dot += y[j] * g[j];
            for (int64_t j = 0; j < c; ++j) px.grad[i * c + j] += y[j] * (g[j] - dot);
        }
    });
}

template <typename S>
TensorT<S> log_softmax_rows(const TensorT<S>& x) {
    if (x.rank() != 2) throw ConfigError("log_softmax_rows: expects a matrix");
    int64_t r = x.dim(0), c = x.dim(1);
    std::vector<S> out(x.size());
    for (int64_t i = 0; i < r; ++i) {
        const S* row = x.data() + i * c;
        S m = row[0];
        for (int64_t j = 1; j < c; ++j) m = std::max(m, row[j]);
        double z = 0;
        for (int64_t j = 0; j < c; ++j) z += std::exp(static_cast<double>(row[j] - m));
        S lse = m + static_cast<S>(std::log(z));
        for (int64_t j = 0; j < c; ++j) out[i * c + j] = row[j] - lse;
    }
    return detail::make_op<S>(x.shape(), std::move(out), {x}, [r, c](NodeT<S>& n) {
        auto& px = *n.parents[0];
        for (int64_t i = 0; i < r; ++i) {
            const S* y = n.value.data() + i * c;
            const S* g = n.grad.data() + i * c;
            S gsum = 0;
            for (int64_t j = 0; j < c; ++j) gsum += g[j];
            for (int64_t j = 0; j < c; ++j) px.grad[i * c + j] += g[j] - std::exp(y[j]) * gsum;
        }
    });
}

// Per-row cross entropy against integer targets: out[i] = -log softmax(x_i)[t_i].
template <typename S>
TensorT<S> cross_entropy_rows(const TensorT<S>& logits, const std::vector<int>& targets) {
    if (logits.rank() != 2) throw ConfigError("cross_entropy_rows: expects a matrix");
    int64_t r = logits.dim(0), c = logits.dim(1);
    if (static_cast<int64_t>(targets.size()) != r) throw ConfigError("cross_entropy_rows: target count");
    for (int t : targets)
        if (t < 0 || t >= c) throw ConfigError("cross_entropy_rows: target out of range");
    std::vector<S> out(r);
    for (int64_t i = 0; i < r; ++i) {
        const S* row = logits.data() + i * c;
        S m = row[0];
        for (int64_t j = 1; j < c; ++j) m = std::max(m, row[j]);
        double z = 0;
        for (int64_t j = 0; j < c; ++j) z += std::exp(static_cast<double>(row[j] - m));
        out[i] = m + static_cast<S>(std::log(z)) - row[targets[i]];
    }
    return detail::make_op<S>({r}, std::move(out), {logits}, [r, c, targets](NodeT<S>& n) {
        auto& px = *n.parents[0];
        for (int64_t i = 0; i < r; ++i) {
            const S* row = px.value.data() + i * c;
            S m = row[0];
            for (int64_t j = 1; j < c; ++j) m = std::max(m, row[j]);
            double z = 0;
            for (int64_t j = 0; j < c; ++j) z += std::exp(static_cast<double>(row[j] - m));
            S g = n.grad[i];
            for (int64_t j = 0; j < c; ++j)
                px.grad[i * c + j] += static_cast<S>(g * std::exp(static_cast<double>(row[j] - m)) / z);
            px.grad[i * c + targets[i]] -= g;
        }
    });
}

// mean over rows of per-row cross entropy
template <typename S>
TensorT<S> cross_entropy(const TensorT<S>& logits, const std::vector<int>& targets) {
    return mean(cross_entropy_rows(logits, targets));
}

template <typename S>
TensorT<S> layer_norm_rows(const TensorT<S>& x, const TensorT<S>& gamma, const TensorT<S>& beta,
                           S eps = S(1e-5)) {
    if (x.rank() != 2) throw ConfigError("layer_norm_rows: expects a matrix");
    int64_t r = x.dim(0), c = x.dim(1);
    if (gamma.size() != c || beta.size() != c) throw ConfigError("layer_norm_rows: affine size");
    std::vector<S> out(x.size());
    std::vector<S> inv_std(r), mu(r);
    for (int64_t i = 0; i < r; ++i) {
        const S* row = x.data() + i * c;
        double macc = 0;
        for (int64_t j = 0; j < c; ++j) macc += static_cast<double>(row[j]);
        S m = static_cast<S>(macc / static_cast<double>(c));
        double vacc = 0;
        for (int64_t j = 0; j < c; ++j)
            vacc += static_cast<double>(row[j] - m) * static_cast<double>(row[j] - m);
        S var = static_cast<S>(vacc / static_cast<double>(c));
        S is = S(1) / std::sqrt(var + eps);
        mu[i] = m;
        inv_std[i] = is;
        for (int64_t j = 0; j < c; ++j)
            out[i * c + j] = (row[j] - m) * is * gamma.data()[j] + beta.data()[j];
    }
    return detail::make_op<S>(x.shape(), std::move(out), {x, gamma, beta},
                              [r, c, mu, inv_std](NodeT<S>& n) {
        auto& px = *n.parents[0];
        auto& pg = *n.parents[1];
        auto& pb = *n.parents[2];
        for (int64_t i = 0; i < r; ++i) {
            const S* row = px.value.data() + i * c;
            const S* g = n.grad.data() + i * c;
            S is = inv_std[i], m = mu[i];
            S sum_gg = 0, sum_ggx = 0;
            for (int64_t j = 0; j < c; ++j) {
                S xh = (row[j] - m) * is;
                S gg = g[j] * pg.value[j];
                sum_gg += gg;
                sum_ggx += gg * xh;
                if (pg.requires_grad) pg.grad[j] += g[j] * xh;
                if (pb.requires_grad) pb.grad[j] += g[j];
            }
            if (px.requires_grad) {
                for (int64_t j = 0; j < c; ++j) {
                    S xh = (row[j] - m) * is;
                    S gg = g[j] * pg.value[j];
                    px.grad[i * c + j] += is * (gg - sum_gg / S(c) - xh * sum_ggx / S(c));
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// lookup / conv
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> embedding_lookup(const TensorT<S>& table, const std::vector<int>& indices) {
    if (table.rank() != 2) throw ConfigError("embedding_lookup: table must be 2-D");
    int64_t n = table.dim(0), c = table.dim(1);
    for (int idx : indices)
        if (idx < 0 || idx >= n) throw ConfigError("embedding_lookup: index out of range");
    int64_t r = static_cast<int64_t>(indices.size());
    std::vector<S> out(r * c);
    for (int64_t i = 0; i < r; ++i)
        std::copy_n(table.data() + indices[i] * c, c, out.begin() + i * c);
    return detail::make_op<S>({r, c}, std::move(out), {table}, [r, c, indices](NodeT<S>& nd) {
        auto& pt = *nd.parents[0];
        for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < c; ++j) pt.grad[indices[i] * c + j] += nd.grad[i * c + j];
    });
}

// Temporal convolution over x[T x Cin] with kernel w[K x Cin x Cout] and bias b[Cout].
// Zero padding of `padding` frames on each side; output length floor((T + 2p - K)/stride) + 1.
template <typename S>
TensorT<S> conv1d(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b, int64_t stride,
                  int64_t padding) {
    if (x.rank() != 2 || w.rank() != 3) throw ConfigError("conv1d: x must be [T,Cin], w [K,Cin,Cout]");
    int64_t t_in = x.dim(0), cin = x.dim(1);
    int64_t k = w.dim(0), cout = w.dim(2);
    if (w.dim(1) != cin) throw ConfigError("conv1d: channel mismatch");
    if (b.size() != cout) throw ConfigError("conv1d: bias size");
    if (stride < 1 || padding < 0) throw ConfigError("conv1d: bad stride/padding");
    int64_t padded = t_in + 2 * padding;
    if (padded < k) throw ConfigError("conv1d: input shorter than kernel");
    int64_t t_out = (padded - k) / stride + 1;
    std::vector<S> out(t_out * cout);
    std::vector<double> acc(cout);
    for (int64_t t = 0; t < t_out; ++t) {
        for (int64_t o = 0; o < cout; ++o) acc[o] = static_cast<double>(b.data()[o]);
        for (int64_t kk = 0; kk < k; ++kk) {
            int64_t ti = t * stride + kk - padding;
            if (ti < 0 || ti >= t_in) continue;
            const S* xrow = x.data() + ti * cin;
            const S* wrow = w.data() + kk * cin * cout;
            for (int64_t c = 0; c < cin; ++c) {
                double xv = static_cast<double>(xrow[c]);
                if (xv == 0.0) continue;
                const S* wc = wrow + c * cout;
                for (int64_t o = 0; o < cout; ++o) acc[o] += xv * static_cast<double>(wc[o]);
            }
        }
        S* orow = out.data() + t * cout;
        for (int64_t o = 0; o < cout; ++o) orow[o] = static_cast<S>(acc[o]);
    }
    return detail::make_op<S>({t_out, cout}, std::move(out), {x, w, b},
                              [t_in, cin, k, cout, stride, padding, t_out](NodeT<S>& nd) {
        auto& px = *nd.parents[0];
        auto& pw = *nd.parents[1];
        auto& pb = *nd.parents[2];
        for (int64_t t = 0; t < t_out; ++t) {
            const S* grow = nd.grad.data() + t * cout;
            for (int64_t kk = 0; kk < k; ++kk) {
                int64_t ti = t * stride + kk - padding;
                if (ti < 0 || ti >= t_in) continue;
                const S* xrow = px.value.data() + ti * cin;
                for (int64_t c = 0; c < cin; ++c) {
                    const S* wc = pw.value.data() + (kk * cin + c) * cout;
                    if (px.requires_grad) {
                        S acc = 0;
                        for (int64_t o = 0; o < cout; ++o) acc += grow[o] * wc[o];
                        px.grad[ti * cin + c] += acc;
                    }
                    if (pw.requires_grad) {
                        S xv = xrow[c];
                        S* wg = pw.grad.data() + (kk * cin + c) * cout;
                        for (int64_t o = 0; o < cout; ++o) wg[o] += grow[o] * xv;
                    }
                }
            }
            if (pb.requires_grad)
                for (int64_t o = 0; o < cout; ++o) pb.grad[o] += grow[o];
        }
    });
}

// Nearest-repeat upsampling: out[2t] = out[2t+1] = x[t]. Constant inputs stay
// constant through the whole decoder stack, which is what makes a repeated
// single code decode to a frozen pose regardless of weights.
template <typename S>
TensorT<S> upsample2x_repeat(const TensorT<S>& x) {
    if (x.rank() != 2) throw ConfigError("upsample2x_repeat: expects [T,C]");
    int64_t t = x.dim(0), c = x.dim(1);
    std::vector<S> out(2 * t * c);
    for (int64_t i = 0; i < t; ++i) {
        std::copy_n(x.data() + i * c, c, out.begin() + 2 * i * c);
        std::copy_n(x.data() + i * c, c, out.begin() + (2 * i + 1) * c);
    }
    return detail::make_op<S>({2 * t, c}, std::move(out), {x}, [t, c](NodeT<S>& n) {
        auto& px = *n.parents[0];
        for (int64_t i = 0; i < t; ++i)
            for (int64_t j = 0; j < c; ++j)
                px.grad[i * c + j] += n.grad[2 * i * c + j] + n.grad[(2 * i + 1) * c + j];
    });
}

// Zero-insertion upsampling: out[2t] = x[t], out[2t+1] = 0. Pairing this with a
// stride-1 conv gives the transposed-conv path.
template <typename S>
TensorT<S> upsample2x_zeros(const TensorT<S>& x) {
    if (x.rank() != 2) throw ConfigError("upsample2x_zeros: expects [T,C]");
    int64_t t = x.dim(0), c = x.dim(1);
    std::vector<S> out(2 * t * c, S(0));
    for (int64_t i = 0; i < t; ++i)
        std::copy_n(x.data() + i * c, c, out.begin() + 2 * i * c);
    return detail::make_op<S>({2 * t, c}, std::move(out), {x}, [t, c](NodeT<S>& n) {
        auto& px = *n.parents[0];
        for (int64_t i = 0; i < t; ++i)
            for (int64_t j = 0; j < c; ++j) px.grad[i * c + j] += n.grad[2 * i * c + j];
    });
}

// ---------------------------------------------------------------------------
// dropout
// ---------------------------------------------------------------------------

// Inverted dropout driven by an explicit engine; eval mode is the identity.
template <typename S, typename Rng>
TensorT<S> dropout(const TensorT<S>& x, double p, bool train, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: p must be in [0,1)");
    if (!train || p == 0.0) {
        std::vector<S> out(x.values());
        return detail::make_op<S>(x.shape(), std::move(out), {x}, [](NodeT<S>& n) {
            auto& px = *n.parents[0];
            for (int64_t i = 0; i < n.size(); ++i) px.grad[i] += n.grad[i];
        });
    }
    const S keep = S(1.0 - p);
    const S inv_keep = S(1) / keep;
    auto mask = std::make_shared<std::vector<S>>(x.size());
    const uint64_t threshold = static_cast<uint64_t>(p * 18446744073709551615.0);
    for (int64_t i = 0; i < x.size(); ++i)
        (*mask)[i] = (rng() < threshold) ? S(0) : inv_keep;
    std::vector<S> out(x.size());
    for (int64_t i = 0; i < x.size(); ++i) out[i] = x.data()[i] * (*mask)[i];
    return detail::make_op<S>(x.shape(), std::move(out), {x}, [mask](NodeT<S>& n) {
        auto& px = *n.parents[0];
        for (int64_t i = 0; i < n.size(); ++i) px.grad[i] += n.grad[i] * (*mask)[i];
    });
}

// ---------------------------------------------------------------------------
// data-only helpers (no gradients)
// ---------------------------------------------------------------------------

template <typename S>
std::vector<int> argmax_rows(const TensorT<S>& x) {
    if (x.rank() != 2) throw ConfigError("argmax_rows: expects a matrix");
    int64_t r = x.dim(0), c = x.dim(1);
    std::vector<int> out(r);
    for (int64_t i = 0; i < r; ++i) {
        const S* row = x.data() + i * c;
        int best = 0;
        for (int64_t j = 1; j < c; ++j)
            if (row[j] > row[best]) best = static_cast<int>(j);
        out[i] = best;
    }
    return out;
}

template <typename S>
bool all_finite(const TensorT<S>& x) {
    for (int64_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x.data()[i])) return false;
    return true;
}

}  // namespace choreo
