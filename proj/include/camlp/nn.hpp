#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "camlp/tensor.hpp"

namespace camlp {

template <typename T>
struct NamedParam {
    std::string name;
    Tensor<T> tensor;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

/// Uniform He initialization: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
template <typename T>
std::vector<T> kaiming_init(const Shape& shape, std::size_t fan_in, std::uint64_t seed) {
    if (fan_in == 0) throw ContractError("kaiming_init: fan_in must be >= 1");
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<T> values(shape_numel(shape));
    for (auto& v : values) v = static_cast<T>(dist(rng));
    return values;
}

// ---------------------------------------------------------------------------
// Linear

template <typename T>
struct LinearLayer {
    Tensor<T> weight;  // [out x in]
    Tensor<T> bias;    // [out]

    std::size_t in_features() const { return weight.dim(1); }
    std::size_t out_features() const { return weight.dim(0); }

    static LinearLayer create(std::size_t in, std::size_t out, std::uint64_t seed) {
        return {Tensor<T>({out, in}, kaiming_init<T>({out, in}, in, seed), true), Tensor<T>::zeros({out}, true)};
    }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        out.push_back({prefix + ".weight", weight});
        out.push_back({prefix + ".bias", bias});
    }
};

/// y = x·Wᵀ + b along the last axis of x.
template <typename T>
Tensor<T> linear_forward(const LinearLayer<T>& layer, const Tensor<T>& x) {
    const std::size_t in = layer.in_features(), out = layer.out_features();
    if (x.shape().back() != in) {
        throw ShapeError("linear: input " + shape_str(x.shape()) + " does not end in " + std::to_string(in));
    }
    const std::size_t rows = x.numel() / in;
    Shape out_shape = x.shape();
    out_shape.back() = out;
    auto flat = reshape(x, {rows, in});
    auto y = add(matmul(flat, transpose2d(layer.weight)), reshape(layer.bias, {1, out}));
    return reshape(y, std::move(out_shape));
}

// ---------------------------------------------------------------------------
// 1-D convolution, stride 1, zero same-padding, cross-correlation convention.

template <typename T>
struct Conv1dLayer {
    Tensor<T> kernels;  // [out_ch x in_ch x k]
    Tensor<T> bias;     // [out_ch]

    std::size_t out_channels() const { return kernels.dim(0); }
    std::size_t in_channels() const { return kernels.dim(1); }
    std::size_t width() const { return kernels.dim(2); }

    static Conv1dLayer create(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::uint64_t seed) {
        if (k % 2 == 0) throw ContractError("conv1d: kernel width must be odd, got " + std::to_string(k));
        return {Tensor<T>({out_ch, in_ch, k}, kaiming_init<T>({out_ch, in_ch, k}, in_ch * k, seed), true),
                Tensor<T>::zeros({out_ch}, true)};
    }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        out.push_back({prefix + ".weight", kernels});
        out.push_back({prefix + ".bias", bias});
    }
};

template <typename T>
Tensor<T> conv1d_same(const Conv1dLayer<T>& layer, const Tensor<T>& x) {
    const std::size_t out_ch = layer.out_channels(), in_ch = layer.in_channels(), k = layer.width();
    if (k % 2 == 0) throw ContractError("conv1d: kernel width must be odd");
    if (x.rank() != 3 || x.dim(1) != in_ch) {
        throw ShapeError("conv1d: expected [batch x " + std::to_string(in_ch) + " x T], got " + shape_str(x.shape()));
    }
    const std::size_t batch = x.dim(0), len = x.dim(2);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    const std::ptrdiff_t slen = static_cast<std::ptrdiff_t>(len);

    // Valid output range [lo, hi) for tap j, where input index is t + j - pad.
    auto tap_range = [=](std::size_t j) {
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(slen, slen - shift);
        return std::tuple{shift, lo, hi};
    };

    const T* X = x.data().data();
    const T* W = layer.kernels.data().data();
    const T* B = layer.bias.data().data();
    std::vector<T> out(batch * out_ch * len);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < out_ch; ++o) {
            T* y = out.data() + (b * out_ch + o) * len;
            std::fill(y, y + len, B[o]);
            for (std::size_t c = 0; c < in_ch; ++c) {
                const T* xs = X + (b * in_ch + c) * len;
                for (std::size_t j = 0; j < k; ++j) {
                    const T w = W[(o * in_ch + c) * k + j];
                    auto [shift, lo, hi] = tap_range(j);
                    for (std::ptrdiff_t t = lo; t < hi; ++t) y[t] += w * xs[t + shift];
                }
            }
        }
    }

    return Tensor<T>::make_result(
        {batch, out_ch, len}, std::move(out), {x, layer.kernels, layer.bias},
        [=](detail::Node<T>& self) {
            auto& px = *self.parents[0];
            auto& pw = *self.parents[1];
            auto& pb = *self.parents[2];
            const T* G = self.grad.data();
            T* dX = px.requires_grad ? px.grad_buffer().data() : nullptr;
            T* dW = pw.requires_grad ? pw.grad_buffer().data() : nullptr;
            T* dB = pb.requires_grad ? pb.grad_buffer().data() : nullptr;
            const T* Xd = px.data.data();
            const T* Wd = pw.data.data();
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t o = 0; o < out_ch; ++o) {
                    const T* g = G + (b * out_ch + o) * len;
                    if (dB) {
                        T acc = T(0);
#pragma omp simd reduction(+ : acc)
                        for (std::size_t t = 0; t < len; ++t) acc += g[t];
                        dB[o] += acc;
                    }
                    for (std::size_t c = 0; c < in_ch; ++c) {
                        const T* xs = Xd + (b * in_ch + c) * len;
                        T* dxs = dX ? dX + (b * in_ch + c) * len : nullptr;
                        for (std::size_t j = 0; j < k; ++j) {
                            const std::size_t wi = (o * in_ch + c) * k + j;
                            auto [shift, lo, hi] = tap_range(j);
                            if (dW) {
                                T acc = T(0);
#pragma omp simd reduction(+ : acc)
                                for (std::ptrdiff_t t = lo; t < hi; ++t) acc += g[t] * xs[t + shift];
                                dW[wi] += acc;
                            }
                            if (dxs) {
                                const T w = Wd[wi];
                                for (std::ptrdiff_t t = lo; t < hi; ++t) dxs[t + shift] += w * g[t];
                            }
                        }
                    }
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Non-overlapping average pooling over the last axis; the remainder T mod k
// is dropped.

template <typename T>
Tensor<T> avg_pool1d(const Tensor<T>& x, std::size_t k) {
    if (k == 0) throw ContractError("avg_pool1d: kernel must be >= 1");
    const std::size_t len = x.shape().back();
    if (len < k) {
        throw ShapeError("avg_pool1d: length " + std::to_string(len) + " shorter than kernel " + std::to_string(k));
    }
    const std::size_t out_len = len / k;
    const std::size_t rows = x.numel() / len;
    Shape shape = x.shape();
    shape.back() = out_len;
    const T inv = T(1) / static_cast<T>(k);
    const T* X = x.data().data();
    std::vector<T> out(rows * out_len, T(0));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < out_len; ++i) {
            T acc = T(0);
            for (std::size_t j = 0; j < k; ++j) acc += X[r * len + i * k + j];
            out[r * out_len + i] = acc * inv;
        }
    return Tensor<T>::make_result(std::move(shape), std::move(out), {x}, [=](detail::Node<T>& self) {
        T* dX = self.parents[0]->grad_buffer().data();
        const T* G = self.grad.data();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t i = 0; i < out_len; ++i)
                for (std::size_t j = 0; j < k; ++j) dX[r * len + i * k + j] += G[r * out_len + i] * inv;
    });
}

// ---------------------------------------------------------------------------
// Batch normalization over [batch x features x T], statistics per feature.

template <typename T>
struct BatchNorm1d {
    Tensor<T> gamma;
    Tensor<T> beta;
    std::vector<T> running_mean;
    std::vector<T> running_var;
    double momentum = 0.1;
    double eps = 1e-5;
    bool training = true;

    std::size_t features() const { return gamma.numel(); }

    static BatchNorm1d create(std::size_t features, double momentum = 0.1, double eps = 1e-5) {
        return {Tensor<T>::full({features}, T(1), true),
                Tensor<T>::zeros({features}, true),
                std::vector<T>(features, T(0)),
                std::vector<T>(features, T(1)),
                momentum,
                eps,
                true};
    }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        out.push_back({prefix + ".gamma", gamma});
        out.push_back({prefix + ".beta", beta});
    }
};

/// Train mode normalizes with biased batch statistics and updates the running
/// estimates; eval mode uses the running estimates.
template <typename T>
Tensor<T> batch_norm1d(BatchNorm1d<T>& bn, const Tensor<T>& x) {
    const std::size_t F = bn.features();
    if (x.rank() != 3 || x.dim(1) != F) {
        throw ShapeError("batch_norm1d: expected [batch x " + std::to_string(F) + " x T], got " +
                         shape_str(x.shape()));
    }
    const std::size_t batch = x.dim(0), len = x.dim(2);
    const std::size_t count = batch * len;
    const T* X = x.data().data();
    const T* gamma = bn.gamma.data().data();
    const T* beta = bn.beta.data().data();

    std::vector<T> inv_std(F), xhat(x.numel());
    if (bn.training) {
        if (count < 2) throw ContractError("batch_norm1d: train mode needs at least 2 values per feature");
        for (std::size_t f = 0; f < F; ++f) {
            double m = 0.0;
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t t = 0; t < len; ++t) m += X[(b * F + f) * len + t];
            m /= static_cast<double>(count);
            double v = 0.0;
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t t = 0; t < len; ++t) {
                    const double d = X[(b * F + f) * len + t] - m;
                    v += d * d;
                }
            v /= static_cast<double>(count);
            const T is = static_cast<T>(1.0 / std::sqrt(v + bn.eps));
            inv_std[f] = is;
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t t = 0; t < len; ++t) {
                    const std::size_t i = (b * F + f) * len + t;
                    xhat[i] = (X[i] - static_cast<T>(m)) * is;
                }
            bn.running_mean[f] = static_cast<T>((1.0 - bn.momentum) * bn.running_mean[f] + bn.momentum * m);
            bn.running_var[f] = static_cast<T>((1.0 - bn.momentum) * bn.running_var[f] + bn.momentum * v);
        }
    } else {
        for (std::size_t f = 0; f < F; ++f) {
            inv_std[f] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(bn.running_var[f]) + bn.eps));
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t t = 0; t < len; ++t) {
                    const std::size_t i = (b * F + f) * len + t;
                    xhat[i] = (X[i] - bn.running_mean[f]) * inv_std[f];
                }
        }
    }

    std::vector<T> out(x.numel());
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t f = 0; f < F; ++f)
            for (std::size_t t = 0; t < len; ++t) {
                const std::size_t i = (b * F + f) * len + t;
                out[i] = gamma[f] * xhat[i] + beta[f];
            }

    const bool training = bn.training;
    return Tensor<T>::make_result(
        x.shape(), std::move(out), {x, bn.gamma, bn.beta},
        [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node<T>& self) {
            auto& px = *self.parents[0];
            auto& pg = *self.parents[1];
            auto& pb = *self.parents[2];
            const T* G = self.grad.data();
            const T* gam = pg.data.data();
            for (std::size_t f = 0; f < F; ++f) {
                T sum_g = T(0), sum_gx = T(0);
                for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t t = 0; t < len; ++t) {
                        const std::size_t i = (b * F + f) * len + t;
                        sum_g += G[i];
                        sum_gx += G[i] * xhat[i];
                    }
                if (pg.requires_grad) pg.grad_buffer()[f] += sum_gx;
                if (pb.requires_grad) pb.grad_buffer()[f] += sum_g;
                if (!px.requires_grad) continue;
                T* dX = px.grad_buffer().data();
                const T scale_f = gam[f] * inv_std[f];
                if (training) {
                    const T n = static_cast<T>(count);
                    for (std::size_t b = 0; b < batch; ++b)
                        for (std::size_t t = 0; t < len; ++t) {
                            const std::size_t i = (b * F + f) * len + t;
                            dX[i] += scale_f * (G[i] - sum_g / n - xhat[i] * sum_gx / n);
                        }
                } else {
                    for (std::size_t b = 0; b < batch; ++b)
                        for (std::size_t t = 0; t < len; ++t) {
                            const std::size_t i = (b * F + f) * len + t;
                            dX[i] += scale_f * G[i];
                        }
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Layer normalization over the last axis.

template <typename T>
struct LayerNormParams {
    Tensor<T> gamma;
    Tensor<T> beta;
    double eps = 1e-5;

    std::size_t features() const { return gamma.numel(); }

    static LayerNormParams create(std::size_t features, double eps = 1e-5) {
        return {Tensor<T>::full({features}, T(1), true), Tensor<T>::zeros({features}, true), eps};
    }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        out.push_back({prefix + ".gamma", gamma});
        out.push_back({prefix + ".beta", beta});
    }
};

template <typename T>
Tensor<T> layer_norm(const LayerNormParams<T>& p, const Tensor<T>& x) {
    const std::size_t F = p.features();
    if (x.shape().back() != F) {
        throw ShapeError("layer_norm: input " + shape_str(x.shape()) + " does not end in " + std::to_string(F));
    }
    const std::size_t rows = x.numel() / F;
    const T* X = x.data().data();
    const T* gamma = p.gamma.data().data();
    const T* beta = p.beta.data().data();
    std::vector<T> xhat(x.numel()), inv_std(rows), out(x.numel());
    for (std::size_t r = 0; r < rows; ++r) {
        const T* row = X + r * F;
        double m = 0.0;
        for (std::size_t f = 0; f < F; ++f) m += row[f];
        m /= static_cast<double>(F);
        double v = 0.0;
        for (std::size_t f = 0; f < F; ++f) v += (row[f] - m) * (row[f] - m);
        v /= static_cast<double>(F);
        const T is = static_cast<T>(1.0 / std::sqrt(v + p.eps));
        inv_std[r] = is;
        for (std::size_t f = 0; f < F; ++f) {
            const T h = (row[f] - static_cast<T>(m)) * is;
            xhat[r * F + f] = h;
            out[r * F + f] = gamma[f] * h + beta[f];
        }
    }
    return Tensor<T>::make_result(
        x.shape(), std::move(out), {x, p.gamma, p.beta},
        [F, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node<T>& self) {
            auto& px = *self.parents[0];
            auto& pg = *self.parents[1];
            auto& pb = *self.parents[2];
            const T* G = self.grad.data();
            const T* gam = pg.data.data();
            T* dG = pg.requires_grad ? pg.grad_buffer().data() : nullptr;
            T* dB = pb.requires_grad ? pb.grad_buffer().data() : nullptr;
            T* dX = px.requires_grad ? px.grad_buffer().data() : nullptr;
            const T n = static_cast<T>(F);
            for (std::size_t r = 0; r < rows; ++r) {
                const T* g = G + r * F;
                const T* h = xhat.data() + r * F;
                T sum_d = T(0), sum_dh = T(0);
                for (std::size_t f = 0; f < F; ++f) {
                    if (dG) dG[f] += g[f] * h[f];
                    if (dB) dB[f] += g[f];
                    const T d = g[f] * gam[f];
                    sum_d += d;
                    sum_dh += d * h[f];
                }
                if (!dX) continue;
                for (std::size_t f = 0; f < F; ++f) {
                    const T d = g[f] * gam[f];
                    dX[r * F + f] += inv_std[r] * (d - sum_d / n - h[f] * sum_dh / n);
                }
            }
        });
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
    std::vector<T> out(x.data().begin(), x.data().end());
    for (auto& v : out)
        if (v < T(0)) v *= slope;
    return Tensor<T>::make_result(x.shape(), std::move(out), {x}, [slope](detail::Node<T>& self) {
        auto& px = *self.parents[0];
        auto& dX = px.grad_buffer();
        for (std::size_t i = 0; i < dX.size(); ++i) dX[i] += px.data[i] >= T(0) ? self.grad[i] : slope * self.grad[i];
    });
}

/// Row-wise softmax without gradient tracking (inference only).
template <typename T>
std::vector<std::vector<double>> softmax_rows(const Tensor<T>& logits) {
    const std::size_t K = logits.shape().back();
    const std::size_t rows = logits.numel() / K;
    const auto Z = logits.data();
    std::vector<std::vector<double>> probs(rows, std::vector<double>(K));
    for (std::size_t r = 0; r < rows; ++r) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < K; ++c) mx = std::max(mx, static_cast<double>(Z[r * K + c]));
        double total = 0.0;
        for (std::size_t c = 0; c < K; ++c) total += probs[r][c] = std::exp(Z[r * K + c] - mx);
        for (auto& p : probs[r]) p /= total;
    }
    return probs;
}

/// Mean over the batch of -log softmax(logits)[target].
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> targets) {
    if (logits.rank() != 2) throw ShapeError("cross entropy: logits must be [batch x classes], got " + shape_str(logits.shape()));
    const std::size_t B = logits.dim(0), K = logits.dim(1);
    if (targets.size() != B) throw ShapeError("cross entropy: " + std::to_string(targets.size()) + " targets for batch " + std::to_string(B));
    for (int t : targets) {
        if (t < 0 || static_cast<std::size_t>(t) >= K) {
            throw ContractError("cross entropy: target " + std::to_string(t) + " outside [0, " + std::to_string(K) + ")");
        }
    }
    const T* Z = logits.data().data();
    std::vector<T> probs(B * K);
    double loss = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        const T* z = Z + b * K;
        T mx = z[0];
        for (std::size_t c = 1; c < K; ++c) mx = std::max(mx, z[c]);
        double total = 0.0;
        for (std::size_t c = 0; c < K; ++c) total += std::exp(static_cast<double>(z[c] - mx));
        const double lse = static_cast<double>(mx) + std::log(total);
        loss += lse - static_cast<double>(z[targets[b]]);
        for (std::size_t c = 0; c < K; ++c) probs[b * K + c] = static_cast<T>(std::exp(static_cast<double>(z[c]) - lse));
    }
    loss /= static_cast<double>(B);
    std::vector<int> target_copy(targets.begin(), targets.end());
    return Tensor<T>::make_result(
        {1}, {static_cast<T>(loss)}, {logits},
        [B, K, probs = std::move(probs), target_copy = std::move(target_copy)](detail::Node<T>& self) {
            T* dZ = self.parents[0]->grad_buffer().data();
            const T g = self.grad[0] / static_cast<T>(B);
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t c = 0; c < K; ++c) {
                    const T onehot = static_cast<int>(c) == target_copy[b] ? T(1) : T(0);
                    dZ[b * K + c] += g * (probs[b * K + c] - onehot);
                }
        });
}

}  // namespace camlp
