#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "velab/tensor.hpp"

namespace velab::ag {

// Reverse-mode autodiff over whole tensors. Each op builds one node with a
// hand-written backward; graphs are built per step and freed with the last
// shared_ptr. Only leaves created with requires_grad keep their gradient
// after backward().
struct Node;
using Value = std::shared_ptr<Node>;

struct Node {
    Tensor val;
    Tensor grad;                      // allocated lazily during backward
    bool requires_grad = false;       // true if any leaf below requires grad
    bool is_leaf = false;
    std::vector<Value> parents;
    std::function<void(Node&)> backfn;  // scatters node.grad into parents

    void ensure_grad() {
        if (grad.data.empty()) grad = Tensor(val.shape);
    }
};

inline Value leaf(Tensor t, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->requires_grad = requires_grad;
    n->is_leaf = true;
    return n;
}

inline Value constant(Tensor t) { return leaf(std::move(t), false); }

inline Value make_op(Tensor out, std::vector<Value> parents, std::function<void(Node&)> backfn) {
    auto n = std::make_shared<Node>();
    n->val = std::move(out);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backfn = std::move(backfn);
    return n;
}

inline void check_same_shape(const Value& a, const Value& b, const char* op) {
    if (!a->val.same_shape(b->val)) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

// ---------------------------------------------------------------- elementwise

inline Value add(const Value& a, const Value& b) {
    check_same_shape(a, b, "add");
    Tensor out = a->val;
    for (long i = 0; i < out.numel(); ++i) out[i] += b->val[i];
    return make_op(std::move(out), {a, b}, [](Node& n) {
        for (int k = 0; k < 2; ++k) {
            Node& p = *n.parents[static_cast<std::size_t>(k)];
            if (!p.requires_grad) continue;
            p.ensure_grad();
            for (long i = 0; i < n.grad.numel(); ++i) p.grad[i] += n.grad[i];
        }
    });
}

inline Value sub(const Value& a, const Value& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a->val;
    for (long i = 0; i < out.numel(); ++i) out[i] -= b->val[i];
    return make_op(std::move(out), {a, b}, [](Node& n) {
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (long i = 0; i < n.grad.numel(); ++i) pa.grad[i] += n.grad[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (long i = 0; i < n.grad.numel(); ++i) pb.grad[i] -= n.grad[i];
        }
    });
}

inline Value mul(const Value& a, const Value& b) {
    check_same_shape(a, b, "mul");
    Tensor out = a->val;
    for (long i = 0; i < out.numel(); ++i) out[i] *= b->val[i];
    return make_op(std::move(out), {a, b}, [](Node& n) {
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (long i = 0; i < n.grad.numel(); ++i) pa.grad[i] += n.grad[i] * pb.val[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (long i = 0; i < n.grad.numel(); ++i) pb.grad[i] += n.grad[i] * pa.val[i];
        }
    });
}

inline Value scale(const Value& a, double c) {
    Tensor out = a->val;
    for (auto& v : out.data) v *= c;
    return make_op(std::move(out), {a}, [c](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        for (long i = 0; i < n.grad.numel(); ++i) p.grad[i] += c * n.grad[i];
    });
}

inline Value gelu(const Value& a) {
    // exact erf form; smooth everywhere
    Tensor out = a->val;
    for (auto& v : out.data) v = 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2));
    return make_op(std::move(out), {a}, [](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        constexpr double inv_sqrt_2pi = 0.3989422804014327;
        for (long i = 0; i < n.grad.numel(); ++i) {
            const double x = p.val[i];
            const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
            p.grad[i] += n.grad[i] * (cdf + x * pdf);
        }
    });
}

// y = x * (1 + s) + b with s, b row vectors over the last dim (shape [d]).
// s and b are plain tensors (timestep modulation comes from frozen weights).
inline Value rowwise_affine(const Value& x, const Tensor& s, const Tensor& b) {
    const int d = x->val.shape.back();
    if (s.numel() != d || b.numel() != d) throw std::invalid_argument("rowwise_affine: bad modulation size");
    Tensor out = x->val;
    const long rows = out.numel() / d;
    for (long r = 0; r < rows; ++r)
        for (int j = 0; j < d; ++j) out[r * d + j] = out[r * d + j] * (1.0 + s[j]) + b[j];
    Tensor s_copy = s;
    return make_op(std::move(out), {x}, [s_copy, d](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        const long rows = n.grad.numel() / d;
        for (long r = 0; r < rows; ++r)
            for (int j = 0; j < d; ++j) p.grad[r * d + j] += n.grad[r * d + j] * (1.0 + s_copy[j]);
    });
}

// ---------------------------------------------------------------- structural

inline Value reshape(const Value& a, std::vector<int> shape) {
    if (Tensor::numel_of(shape) != a->val.numel()) throw std::invalid_argument("reshape: numel mismatch");
    Tensor out(shape, a->val.data);
    return make_op(std::move(out), {a}, [](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        for (long i = 0; i < n.grad.numel(); ++i) p.grad[i] += n.grad[i];
    });
}

// out[i] = a.flat[map[i]], map entry -1 reads as 0.0 (zero padding).
inline Value gather(const Value& a, std::shared_ptr<std::vector<long>> map, std::vector<int> out_shape) {
    Tensor out(out_shape);
    for (long i = 0; i < out.numel(); ++i) {
        const long src = (*map)[static_cast<std::size_t>(i)];
        out[i] = src < 0 ? 0.0 : a->val[src];
    }
    return make_op(std::move(out), {a}, [map](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        for (long i = 0; i < n.grad.numel(); ++i) {
            const long src = (*map)[static_cast<std::size_t>(i)];
            if (src >= 0) p.grad[src] += n.grad[i];
        }
    });
}

// concat along the last dim; all inputs share leading dims
inline Value concat_last(const std::vector<Value>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_last: empty");
    const int nd = xs[0]->val.ndim();
    long rows = xs[0]->val.numel() / xs[0]->val.shape.back();
    int total = 0;
    for (const auto& x : xs) {
        if (x->val.numel() / x->val.shape.back() != rows) throw std::invalid_argument("concat_last: row mismatch");
        total += x->val.shape.back();
    }
    std::vector<int> shape = xs[0]->val.shape;
    shape[static_cast<std::size_t>(nd - 1)] = total;
    Tensor out(shape);
    long off = 0;
    for (const auto& x : xs) {
        const int k = x->val.shape.back();
        for (long r = 0; r < rows; ++r)
            for (int j = 0; j < k; ++j) out[r * total + off + j] = x->val[r * k + j];
        off += k;
    }
    return make_op(std::move(out), xs, [rows, total](Node& n) {
        long off = 0;
        for (auto& pp : n.parents) {
            Node& p = *pp;
            const int k = p.val.shape.back();
            if (p.requires_grad) {
                p.ensure_grad();
                for (long r = 0; r < rows; ++r)
                    for (int j = 0; j < k; ++j) p.grad[r * k + j] += n.grad[r * total + off + j];
            }
            off += k;
        }
    });
}

// columns [start, start+len) of a [N, d] tensor
inline Value slice_cols(const Value& a, int start, int len) {
    const int d = a->val.shape.back();
    const long rows = a->val.numel() / d;
    std::vector<int> shape = a->val.shape;
    shape.back() = len;
    auto map = std::make_shared<std::vector<long>>(static_cast<std::size_t>(rows * len));
    for (long r = 0; r < rows; ++r)
        for (int j = 0; j < len; ++j) (*map)[static_cast<std::size_t>(r * len + j)] = r * d + start + j;
    return gather(a, map, shape);
}

// ---------------------------------------------------------------- linear algebra

// A[m,k] * B[k,n] -> [m,n]
inline Value matmul(const Value& a, const Value& b) {
    const int m = a->val.dim(0), k = a->val.dim(1), n = b->val.dim(1);
    if (b->val.dim(0) != k) throw std::invalid_argument("matmul: inner dim mismatch");
    Tensor out({m, n});
    matmul_acc(a->val.data.data(), b->val.data.data(), out.data.data(), m, k, n);
    return make_op(std::move(out), {a, b}, [m, k, n](Node& nd) {
        Node& pa = *nd.parents[0];
        Node& pb = *nd.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();  // dA = dC * B^T
            matmul_bt_acc(nd.grad.data.data(), pb.val.data.data(), pa.grad.data.data(), m, n, k);
        }
        if (pb.requires_grad) {
            pb.ensure_grad();  // dB = A^T * dC
            matmul_at_acc(pa.val.data.data(), nd.grad.data.data(), pb.grad.data.data(), k, m, n);
        }
    });
}

// x[N,in] * W[out,in]^T (+ bias[out]) -> [N,out]
inline Value linear(const Value& x, const Value& w, const Value& bias = nullptr) {
    const int in = x->val.shape.back();
    const long n = x->val.numel() / in;
    const int out_dim = w->val.dim(0);
    if (w->val.dim(1) != in) throw std::invalid_argument("linear: weight shape mismatch");
    std::vector<int> shape = x->val.shape;
    shape.back() = out_dim;
    Tensor out(shape);
    matmul_bt_acc(x->val.data.data(), w->val.data.data(), out.data.data(), static_cast<int>(n), in, out_dim);
    if (bias) {
        for (long r = 0; r < n; ++r)
            for (int j = 0; j < out_dim; ++j) out[r * out_dim + j] += bias->val[j];
    }
    std::vector<Value> parents = {x, w};
    if (bias) parents.push_back(bias);
    return make_op(std::move(out), std::move(parents), [n, in, out_dim](Node& nd) {
        Node& px = *nd.parents[0];
        Node& pw = *nd.parents[1];
        if (px.requires_grad) {
            px.ensure_grad();  // dX = dY * W
            matmul_acc(nd.grad.data.data(), pw.val.data.data(), px.grad.data.data(),
                       static_cast<int>(n), out_dim, in);
        }
        if (pw.requires_grad) {
            pw.ensure_grad();  // dW = dY^T * X
            matmul_at_acc(nd.grad.data.data(), px.val.data.data(), pw.grad.data.data(),
                          out_dim, static_cast<int>(n), in);
        }
        if (nd.parents.size() > 2 && nd.parents[2]->requires_grad) {
            Node& pb = *nd.parents[2];
            pb.ensure_grad();
            for (long r = 0; r < n; ++r)
                for (int j = 0; j < out_dim; ++j) pb.grad[j] += nd.grad[r * out_dim + j];
        }
    });
}

// ---------------------------------------------------------------- normalizers

inline Value softmax_last(const Value& a) {
    const int d = a->val.shape.back();
    const long rows = a->val.numel() / d;
    Tensor out = a->val;
    for (long r = 0; r < rows; ++r) {
        double* row = out.data.data() + r * d;
        double mx = row[0];
        for (int j = 1; j < d; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        for (int j = 0; j < d; ++j) {
            row[j] = std::exp(row[j] - mx);
            s += row[j];
        }
        for (int j = 0; j < d; ++j) row[j] /= s;
    }
    return make_op(std::move(out), {a}, [d](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        const long rows = n.grad.numel() / d;
        for (long r = 0; r < rows; ++r) {
            const double* y = n.val.data.data() + r * d;
            const double* gy = n.grad.data.data() + r * d;
            double dot_yg = 0.0;
            for (int j = 0; j < d; ++j) dot_yg += y[j] * gy[j];
            double* gx = p.grad.data.data() + r * d;
            for (int j = 0; j < d; ++j) gx[j] += y[j] * (gy[j] - dot_yg);
        }
    });
}

inline Value layernorm_last(const Value& a, double eps = 1e-5) {
    const int d = a->val.shape.back();
    const long rows = a->val.numel() / d;
    Tensor out = a->val;
    auto stats = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows) * 2);
    for (long r = 0; r < rows; ++r) {
        double* row = out.data.data() + r * d;
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += row[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= d;
        const double inv = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < d; ++j) row[j] = (row[j] - mean) * inv;
        (*stats)[static_cast<std::size_t>(r) * 2] = mean;
        (*stats)[static_cast<std::size_t>(r) * 2 + 1] = inv;
    }
    return make_op(std::move(out), {a}, [d, stats](Node& n) {
        Node& p = *n.parents[0];
        p.ensure_grad();
        const long rows = n.grad.numel() / d;
        for (long r = 0; r < rows; ++r) {
            const double inv = (*stats)[static_cast<std::size_t>(r) * 2 + 1];
            const double* y = n.val.data.data() + r * d;
            const double* gy = n.grad.data.data() + r * d;
            double sum_g = 0.0, sum_gy = 0.0;
            for (int j = 0; j < d; ++j) {
                sum_g += gy[j];
                sum_gy += gy[j] * y[j];
            }
            double* gx = p.grad.data.data() + r * d;
            for (int j = 0; j < d; ++j)
                gx[j] += inv * (gy[j] - sum_g / d - y[j] * sum_gy / d);
        }
    });
}

// ---------------------------------------------------------------- stacks

// elementwise max over equal-shaped tensors; gradient routes to the first argmax
inline Value max_stack(const std::vector<Value>& xs) {
    if (xs.empty()) throw std::invalid_argument("max_stack: empty");
    Tensor out = xs[0]->val;
    const long n = out.numel();
    auto which = std::make_shared<std::vector<int>>(static_cast<std::size_t>(n), 0);
    for (std::size_t k = 1; k < xs.size(); ++k) {
        check_same_shape(xs[0], xs[k], "max_stack");
        for (long i = 0; i < n; ++i) {
            if (xs[k]->val[i] > out[i]) {
                out[i] = xs[k]->val[i];
                (*which)[static_cast<std::size_t>(i)] = static_cast<int>(k);
            }
        }
    }
    return make_op(std::move(out), xs, [which](Node& nd) {
        for (long i = 0; i < nd.grad.numel(); ++i) {
            Node& p = *nd.parents[static_cast<std::size_t>((*which)[static_cast<std::size_t>(i)])];
            if (!p.requires_grad) continue;
            p.ensure_grad();
            p.grad[i] += nd.grad[i];
        }
    });
}

inline Value mean_stack(const std::vector<Value>& xs) {
    Value acc = xs[0];
    for (std::size_t k = 1; k < xs.size(); ++k) acc = add(acc, xs[k]);
    return scale(acc, 1.0 / static_cast<double>(xs.size()));
}

// ---------------------------------------------------------------- reductions

inline Value mean_all(const Value& a) {
    const long n = a->val.numel();
    double s = 0.0;
    for (double v : a->val.data) s += v;
    return make_op(Tensor::scalar(s / n), {a}, [n](Node& nd) {
        Node& p = *nd.parents[0];
        p.ensure_grad();
        const double g = nd.grad[0] / n;
        for (long i = 0; i < n; ++i) p.grad[i] += g;
    });
}

// mean squared error over all elements
inline Value mse(const Value& a, const Value& b) {
    check_same_shape(a, b, "mse");
    const long n = a->val.numel();
    double s = 0.0;
    for (long i = 0; i < n; ++i) {
        const double d = a->val[i] - b->val[i];
        s += d * d;
    }
    return make_op(Tensor::scalar(s / n), {a, b}, [n](Node& nd) {
        Node& pa = *nd.parents[0];
        Node& pb = *nd.parents[1];
        const double g = 2.0 * nd.grad[0] / n;
        for (long i = 0; i < n; ++i) {
            const double d = pa.val[i] - pb.val[i];
            if (pa.requires_grad) {
                pa.ensure_grad();
                pa.grad[i] += g * d;
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                pb.grad[i] -= g * d;
            }
        }
    });
}

// KL(p || q) with q floored; p is a fixed target. Inputs are [frames, S]
// per-frame distributions; the divergence is summed over S and averaged
// over frames.
inline Value kl_floored(const Tensor& p, const Value& q, double floor_q) {
    if (!q->val.same_shape(p)) throw std::invalid_argument("kl_floored: shape mismatch");
    const int s_dim = p.shape.back();
    const long frames = p.numel() / s_dim;
    double total = 0.0;
    for (long i = 0; i < p.numel(); ++i) {
        const double pi = p[i];
        if (pi <= 0.0) continue;
        total += pi * std::log(pi / std::max(q->val[i], floor_q));
    }
    Tensor p_copy = p;
    return make_op(Tensor::scalar(total / frames), {q}, [p_copy, floor_q, frames](Node& nd) {
        Node& pq = *nd.parents[0];
        pq.ensure_grad();
        const double g = nd.grad[0] / frames;
        for (long i = 0; i < p_copy.numel(); ++i) {
            if (p_copy[i] <= 0.0) continue;
            if (pq.val[i] > floor_q) pq.grad[i] -= g * p_copy[i] / pq.val[i];
        }
    });
}

// ---------------------------------------------------------------- backward

inline void backward(const Value& root) {
    if (root->val.numel() != 1) throw std::invalid_argument("backward: root must be scalar");
    // topological order by iterative DFS
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx].get();
            ++idx;
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->ensure_grad();
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backfn && !n->grad.data.empty()) n->backfn(*n);
    }
}

}  // namespace velab::ag
