#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "camlp/errors.hpp"

namespace camlp {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace detail {

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until a backward pass reaches this node
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    bool is_leaf() const { return !backward_fn; }

    std::vector<T>& grad_buffer() {
        if (grad.empty()) grad.assign(data.size(), T(0));
        return grad;
    }
};

inline void check_shape(const Shape& shape) {
    for (auto e : shape) {
        if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
    }
}

}  // namespace detail

/// Dense row-major tensor with reverse-mode gradient tracking.
///
/// Copies are shallow: two Tensor handles may refer to the same storage and
/// graph node. Every operation producing a tensor from inputs that require
/// gradients records a node whose backward rule accumulates into the inputs.
template <typename T>
class Tensor {
   public:
    using value_type = T;
    using node_type = detail::Node<T>;
    using BackwardFn = std::function<void(node_type&)>;

    Tensor() = default;

    Tensor(Shape shape, std::vector<T> values, bool requires_grad = false) {
        detail::check_shape(shape);
        if (shape.empty()) shape = {1};
        if (values.size() != shape_numel(shape)) {
            throw ShapeError("tensor of shape " + shape_str(shape) + " needs " +
                             std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(values.size()));
        }
        node_ = std::make_shared<node_type>();
        node_->shape = std::move(shape);
        node_->data = std::move(values);
        node_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) { return full(std::move(shape), T(0), requires_grad); }

    static Tensor full(Shape shape, T value, bool requires_grad = false) {
        detail::check_shape(shape);
        const auto n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
    }

    static Tensor scalar(T value, bool requires_grad = false) { return Tensor({1}, {value}, requires_grad); }

    // Graph hook for operations. The result tracks gradients iff any input does;
    // `backward_fn` receives the result node with its grad populated and reads
    // inputs through `parents` in the order given here.
    static Tensor make_result(Shape shape, std::vector<T> values, std::initializer_list<Tensor> inputs,
                              BackwardFn backward_fn) {
        Tensor out(std::move(shape), std::move(values));
        bool track = false;
        for (const auto& in : inputs) track = track || in.requires_grad();
        if (track) {
            out.node_->requires_grad = true;
            for (const auto& in : inputs) out.node_->parents.push_back(in.node_);
            out.node_->backward_fn = std::move(backward_fn);
        }
        return out;
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->data.size(); }

    std::size_t dim(std::size_t axis) const {
        if (axis >= rank()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
        return node_->shape[axis];
    }

    std::span<const T> data() const { return node_->data; }
    std::span<T> mutable_data() { return node_->data; }

    T item() const {
        if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
        return node_->data[0];
    }

    T at(std::initializer_list<std::size_t> index) const {
        if (index.size() != rank()) throw ShapeError("index rank mismatch for " + shape_str(shape()));
        std::size_t flat = 0;
        std::size_t axis = 0;
        for (auto i : index) {
            if (i >= node_->shape[axis]) throw ShapeError("index out of range for " + shape_str(shape()));
            flat = flat * node_->shape[axis] + i;
            ++axis;
        }
        return node_->data[flat];
    }

    bool requires_grad() const { return node_ && node_->requires_grad; }
    void set_requires_grad(bool flag) { node_->requires_grad = flag; }
    bool is_leaf() const { return node_->is_leaf(); }

    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const T> grad() const { return node_->grad; }
    std::span<T> mutable_grad() { return node_->grad_buffer(); }
    void zero_grad() {
        if (has_grad()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
    }

    // Same storage, cut from the graph.
    Tensor detach() const { return Tensor(shape(), node_->data, false); }

    /// Propagates d(this)/d(input) to every gradient-tracking ancestor.
    ///
    /// Leaf gradients accumulate across calls; intermediate gradients are
    /// recomputed from zero each call. Returns the number of nodes visited.
    std::size_t backward() const;

    node_type& node() const { return *node_; }

   private:
    std::shared_ptr<node_type> node_;
};

template <typename T>
std::size_t Tensor<T>::backward() const {
    if (numel() != 1) throw ContractError("backward() requires a scalar loss, got shape " + shape_str(shape()));
    if (!node_->requires_grad) return 0;

    // Post-order DFS: every node appears after all of its tracked parents.
    std::vector<node_type*> order;
    std::unordered_set<const node_type*> visited;
    std::vector<std::pair<node_type*, std::size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            node_type* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Each pass computes fresh gradients; leaves then add their previous
    // totals so that repeated passes accumulate exactly.
    std::vector<std::pair<node_type*, std::vector<T>>> previous;
    for (node_type* n : order) {
        if (n->is_leaf() && !n->grad.empty()) previous.emplace_back(n, std::move(n->grad));
        n->grad.assign(n->data.size(), T(0));
    }
    node_->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
    }
    for (auto& [n, old] : previous)
        for (std::size_t i = 0; i < old.size(); ++i) n->grad[i] = old[i] + n->grad[i];
    return order.size();
}

namespace detail {

// Maps a flat output index to the flat index of a broadcast operand.
struct BroadcastMap {
    enum class Kind { identity, cyclic, blocked, table } kind = Kind::identity;
    std::size_t period = 1;
    std::vector<std::size_t> lookup;

    std::size_t operator()(std::size_t i) const {
        switch (kind) {
            case Kind::identity:
                return i;
            case Kind::cyclic:
                return i % period;
            case Kind::blocked:
                return i / period;
            default:
                return lookup[i];
        }
    }
};

inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
    if (a == b) return a;
    if (shape_numel(b) == 1) return a;
    if (shape_numel(a) == 1) return b;
    if (a.size() != b.size()) {
        throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    Shape out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == b[i] || b[i] == 1) {
            out[i] = a[i];
        } else if (a[i] == 1) {
            out[i] = b[i];
        } else {
            throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        }
    }
    return out;
}

inline BroadcastMap make_broadcast_map(const Shape& out, const Shape& in) {
    BroadcastMap map;
    if (in == out) return map;
    const std::size_t n_in = shape_numel(in);
    if (n_in == 1) {
        map.kind = BroadcastMap::Kind::blocked;
        map.period = shape_numel(out);
        return map;
    }
    // Non-broadcast axes of `in` form a suffix or a prefix of `out`.
    std::size_t first = in.size(), last = 0;
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] != 1) {
            first = std::min(first, i);
            last = i;
        }
    }
    bool dense = true, suffix = true, prefix = true;
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (i >= first && i <= last) dense = dense && in[i] == out[i];
        if (i > last && out[i] != 1) suffix = false;
        if (i < first && out[i] != 1) prefix = false;
    }
    if (dense && suffix) {
        map.kind = BroadcastMap::Kind::cyclic;
        map.period = n_in;
        return map;
    }
    if (dense && prefix) {
        map.kind = BroadcastMap::Kind::blocked;
        map.period = shape_numel(out) / n_in;
        return map;
    }

    map.kind = BroadcastMap::Kind::table;
    const std::size_t rank = out.size();
    std::vector<std::size_t> in_stride(rank, 0);
    std::size_t s = 1;
    for (std::size_t i = rank; i-- > 0;) {
        in_stride[i] = in[i] == 1 ? 0 : s;
        s *= in[i];
    }
    const std::size_t n = shape_numel(out);
    map.lookup.resize(n);
    std::vector<std::size_t> idx(rank, 0);
    std::size_t offset = 0;
    for (std::size_t flat = 0; flat < n; ++flat) {
        map.lookup[flat] = offset;
        for (std::size_t ax = rank; ax-- > 0;) {
            offset += in_stride[ax];
            if (++idx[ax] < out[ax]) break;
            offset -= in_stride[ax] * idx[ax];
            idx[ax] = 0;
        }
    }
    return map;
}

// Calls fn(i, a_index, b_index) for i in [0, n). Structured maps are walked as
// nested loops so the hot bias-add and row-scaling cases avoid per-element
// division.
template <typename Fn>
void for_each_index(std::size_t n, const BroadcastMap& ma, const BroadcastMap& mb, Fn&& fn) {
    using Kind = BroadcastMap::Kind;
    if (ma.kind == Kind::identity && mb.kind == Kind::identity) {
        for (std::size_t i = 0; i < n; ++i) fn(i, i, i);
    } else if (ma.kind == Kind::identity && mb.kind == Kind::cyclic) {
        for (std::size_t r = 0, i = 0; r < n / mb.period; ++r)
            for (std::size_t j = 0; j < mb.period; ++j, ++i) fn(i, i, j);
    } else if (ma.kind == Kind::identity && mb.kind == Kind::blocked) {
        for (std::size_t r = 0, i = 0; r < n / mb.period; ++r)
            for (std::size_t j = 0; j < mb.period; ++j, ++i) fn(i, i, r);
    } else if (ma.kind == Kind::cyclic && mb.kind == Kind::identity) {
        for (std::size_t r = 0, i = 0; r < n / ma.period; ++r)
            for (std::size_t j = 0; j < ma.period; ++j, ++i) fn(i, j, i);
    } else if (ma.kind == Kind::blocked && mb.kind == Kind::identity) {
        for (std::size_t r = 0, i = 0; r < n / ma.period; ++r)
            for (std::size_t j = 0; j < ma.period; ++j, ++i) fn(i, r, i);
    } else {
        for (std::size_t i = 0; i < n; ++i) fn(i, ma(i), mb(i));
    }
}

enum class BinaryKind { add, sub, mul };

template <typename T>
Tensor<T> binary(BinaryKind kind, const Tensor<T>& a, const Tensor<T>& b) {
    static constexpr const char* names[] = {"add", "sub", "mul"};
    Shape out_shape = broadcast_shape(a.shape(), b.shape(), names[static_cast<int>(kind)]);
    const BroadcastMap ma = make_broadcast_map(out_shape, a.shape());
    const BroadcastMap mb = make_broadcast_map(out_shape, b.shape());
    const std::size_t n = shape_numel(out_shape);
    const auto A = a.data();
    const auto B = b.data();
    std::vector<T> out(n);
    switch (kind) {
        case BinaryKind::add:
            for_each_index(n, ma, mb, [&](std::size_t i, std::size_t x, std::size_t y) { out[i] = A[x] + B[y]; });
            break;
        case BinaryKind::sub:
            for_each_index(n, ma, mb, [&](std::size_t i, std::size_t x, std::size_t y) { out[i] = A[x] - B[y]; });
            break;
        case BinaryKind::mul:
            for_each_index(n, ma, mb, [&](std::size_t i, std::size_t x, std::size_t y) { out[i] = A[x] * B[y]; });
            break;
    }
    return Tensor<T>::make_result(std::move(out_shape), std::move(out), {a, b}, [kind, ma, mb](Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const auto& g = self.grad;
        const std::size_t count = g.size();
        if (pa.requires_grad) {
            T* ga = pa.grad_buffer().data();
            const T* B = pb.data.data();
            if (kind == BinaryKind::mul)
                for_each_index(count, ma, mb, [&](std::size_t i, std::size_t x, std::size_t y) { ga[x] += g[i] * B[y]; });
            else
                for_each_index(count, ma, mb, [&](std::size_t i, std::size_t x, std::size_t) { ga[x] += g[i]; });
        }
        if (pb.requires_grad) {
            T* gb = pb.grad_buffer().data();
            const T* A = pa.data.data();
            switch (kind) {
                case BinaryKind::add:
                    for_each_index(count, ma, mb, [&](std::size_t i, std::size_t, std::size_t y) { gb[y] += g[i]; });
                    break;
                case BinaryKind::sub:
                    for_each_index(count, ma, mb, [&](std::size_t i, std::size_t, std::size_t y) { gb[y] -= g[i]; });
                    break;
                case BinaryKind::mul:
                    for_each_index(count, ma, mb,
                                   [&](std::size_t i, std::size_t x, std::size_t y) { gb[y] += g[i] * A[x]; });
                    break;
            }
        }
    });
}

}  // namespace detail

// Elementwise arithmetic. Operands must have equal shapes, or one of them has a
// single element, or both have the same rank with every differing extent 1 on
// one side. Gradients of broadcast operands are sum-reduced.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary(detail::BinaryKind::add, a, b);
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary(detail::BinaryKind::sub, a, b);
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary(detail::BinaryKind::mul, a, b);
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
    std::vector<T> out(a.data().begin(), a.data().end());
    for (auto& v : out) v *= factor;
    return Tensor<T>::make_result(a.shape(), std::move(out), {a}, [factor](detail::Node<T>& self) {
        auto& ga = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor * self.grad[i];
    });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T value) {
    std::vector<T> out(a.data().begin(), a.data().end());
    for (auto& v : out) v += value;
    return Tensor<T>::make_result(a.shape(), std::move(out), {a}, [](detail::Node<T>& self) {
        auto& ga = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
    });
}

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
    return add(a, b);
}
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) {
    return sub(a, b);
}
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) {
    return mul(a, b);
}
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, T factor) {
    return scale(a, factor);
}

namespace detail {

template <typename T>
std::vector<T> transposed(const T* src, std::size_t rows, std::size_t cols) {
    std::vector<T> out(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = src[i * cols + j];
    return out;
}

// C[M×P] += A[M×K]·B[K×P], all row-major. Wide outputs use row axpy updates;
// narrow outputs (P below one cache line of work) use dot products against Bᵀ.
template <typename T>
void gemm_accumulate(const T* A, const T* B, T* C, std::size_t M, std::size_t K, std::size_t P) {
    if (P >= 32 || K < P) {
        std::size_t i = 0;
        for (; i + 4 <= M; i += 4) {
            T* r0 = C + i * P;
            T* r1 = r0 + P;
            T* r2 = r1 + P;
            T* r3 = r2 + P;
            for (std::size_t k = 0; k < K; ++k) {
                const T a0 = A[i * K + k], a1 = A[(i + 1) * K + k], a2 = A[(i + 2) * K + k], a3 = A[(i + 3) * K + k];
                const T* brow = B + k * P;
#pragma omp simd
                for (std::size_t j = 0; j < P; ++j) {
                    const T b = brow[j];
                    r0[j] += a0 * b;
                    r1[j] += a1 * b;
                    r2[j] += a2 * b;
                    r3[j] += a3 * b;
                }
            }
        }
        for (; i < M; ++i) {
            T* row = C + i * P;
            for (std::size_t k = 0; k < K; ++k) {
                const T aik = A[i * K + k];
                const T* brow = B + k * P;
#pragma omp simd
                for (std::size_t j = 0; j < P; ++j) row[j] += aik * brow[j];
            }
        }
        return;
    }
    const std::vector<T> bt = transposed(B, K, P);
    for (std::size_t i = 0; i < M; ++i) {
        const T* arow = A + i * K;
        for (std::size_t j = 0; j < P; ++j) {
            const T* bcol = bt.data() + j * K;
            T acc = T(0);
#pragma omp simd reduction(+ : acc)
            for (std::size_t k = 0; k < K; ++k) acc += arow[k] * bcol[k];
            C[i * P + j] += acc;
        }
    }
}

}  // namespace detail

/// C = A·B for A [M×K], B [K×P].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
    const std::size_t M = a.dim(0), K = a.dim(1), P = b.dim(1);
    std::vector<T> out(M * P, T(0));
    detail::gemm_accumulate(a.data().data(), b.data().data(), out.data(), M, K, P);
    return Tensor<T>::make_result({M, P}, std::move(out), {a, b}, [M, K, P](detail::Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const T* G = self.grad.data();
        if (pa.requires_grad) {
            // dA = dC·Bᵀ
            const auto bt = detail::transposed(pb.data.data(), K, P);
            detail::gemm_accumulate(G, bt.data(), pa.grad_buffer().data(), M, P, K);
        }
        if (pb.requires_grad) {
            // dB = Aᵀ·dC
            const auto at = detail::transposed(pa.data.data(), M, K);
            detail::gemm_accumulate(at.data(), G, pb.grad_buffer().data(), K, M, P);
        }
    });
}

/// Swaps the two trailing axes: [...×M×N] -> [...×N×M].
template <typename T>
Tensor<T> swap_last_axes(const Tensor<T>& a) {
    if (a.rank() < 2) throw ShapeError("swap_last_axes needs rank >= 2, got " + shape_str(a.shape()));
    Shape shape = a.shape();
    const std::size_t M = shape[shape.size() - 2], N = shape.back();
    const std::size_t batch = a.numel() / (M * N);
    std::swap(shape[shape.size() - 2], shape.back());
    const T* src = a.data().data();
    std::vector<T> out(a.numel());
    for (std::size_t b = 0; b < batch; ++b) {
        const T* s = src + b * M * N;
        T* d = out.data() + b * M * N;
        for (std::size_t i = 0; i < M; ++i)
            for (std::size_t j = 0; j < N; ++j) d[j * M + i] = s[i * N + j];
    }
    return Tensor<T>::make_result(std::move(shape), std::move(out), {a}, [M, N, batch](detail::Node<T>& self) {
        T* ga = self.parents[0]->grad_buffer().data();
        const T* g = self.grad.data();
        for (std::size_t b = 0; b < batch; ++b) {
            const T* gs = g + b * M * N;
            T* gd = ga + b * M * N;
            for (std::size_t i = 0; i < M; ++i)
                for (std::size_t j = 0; j < N; ++j) gd[i * N + j] += gs[j * M + i];
        }
    });
}

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& a) {
    if (a.rank() != 2) throw ShapeError("transpose2d needs a rank-2 tensor, got " + shape_str(a.shape()));
    return swap_last_axes(a);
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
    detail::check_shape(shape);
    if (shape_numel(shape) != a.numel()) {
        throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape) + " changes element count");
    }
    std::vector<T> out(a.data().begin(), a.data().end());
    return Tensor<T>::make_result(std::move(shape), std::move(out), {a}, [](detail::Node<T>& self) {
        auto& ga = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
    });
}

namespace detail {

template <typename T>
Tensor<T> reduce_axis(const Tensor<T>& a, std::size_t axis, bool mean) {
    if (axis >= a.rank()) {
        throw ShapeError("reduce: axis " + std::to_string(axis) + " invalid for " + shape_str(a.shape()));
    }
    const Shape& in = a.shape();
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= in[i];
    for (std::size_t i = axis + 1; i < in.size(); ++i) inner *= in[i];
    const std::size_t n = in[axis];
    Shape shape;
    for (std::size_t i = 0; i < in.size(); ++i)
        if (i != axis) shape.push_back(in[i]);
    if (shape.empty()) shape = {1};

    const T factor = mean ? T(1) / static_cast<T>(n) : T(1);
    const T* src = a.data().data();
    std::vector<T> out(outer * inner, T(0));
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += src[(o * n + j) * inner + i];
    for (auto& v : out) v *= factor;

    return Tensor<T>::make_result(std::move(shape), std::move(out), {a},
                                  [outer, inner, n, factor](Node<T>& self) {
                                      T* ga = self.parents[0]->grad_buffer().data();
                                      const T* g = self.grad.data();
                                      for (std::size_t o = 0; o < outer; ++o)
                                          for (std::size_t j = 0; j < n; ++j)
                                              for (std::size_t i = 0; i < inner; ++i)
                                                  ga[(o * n + j) * inner + i] += factor * g[o * inner + i];
                                  });
}

}  // namespace detail

// Reductions drop the reduced axis; reducing a rank-1 tensor yields shape [1].
template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& a, std::size_t axis) {
    return detail::reduce_axis(a, axis, true);
}

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& a, std::size_t axis) {
    return detail::reduce_axis(a, axis, false);
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
    return reduce_sum(reshape(a, {a.numel()}), 0);
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
    return reduce_mean(reshape(a, {a.numel()}), 0);
}

}  // namespace camlp
