#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "camlp/nn.hpp"
#include "camlp/tensor.hpp"

namespace camlp {

struct ModelConfig {
    std::size_t channels = 62;        // C, EEG electrodes
    std::size_t samples = 150;        // T, slice length
    std::size_t kernel = 3;           // k, conv width and pooling size
    std::size_t filters = 4;          // n, encoder widths are n, 2n, 4n
    std::size_t blocks = 4;           // N
    std::size_t channel_hidden = 256; // D
    std::size_t time_hidden = 128;    // H
    std::size_t num_classes = 3;
    double slope = 0.01;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;
    double ln_eps = 1e-5;

    std::size_t pooled() const { return kernel == 0 ? 0 : samples / kernel; }

    void validate() const {
        auto positive = [](std::size_t v, const char* name) {
            if (v == 0) throw ContractError(std::string("model config: ") + name + " must be positive");
        };
        positive(channels, "channels");
        positive(samples, "samples");
        positive(kernel, "kernel");
        positive(filters, "filters");
        positive(blocks, "blocks");
        positive(channel_hidden, "channel_hidden");
        positive(time_hidden, "time_hidden");
        positive(num_classes, "num_classes");
        if (channels < 2) throw ContractError("model config: channels must be >= 2");
        if (kernel % 2 == 0) throw ContractError("model config: kernel must be odd for same padding");
        if (pooled() < 1) throw ContractError("model config: samples must be >= kernel");
        if (!(slope >= 0.0)) throw ContractError("model config: slope must be non-negative");
        if (!(bn_eps > 0.0) || !(ln_eps > 0.0)) throw ContractError("model config: eps must be positive");
        if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0)) throw ContractError("model config: bn_momentum outside [0, 1]");
    }

    bool operator==(const ModelConfig&) const = default;
};

// Derives independent per-parameter seeds from one model seed.
class SeedSequence {
   public:
    explicit SeedSequence(std::uint64_t seed) : rng_(seed) {}
    std::uint64_t next() { return rng_(); }

   private:
    std::mt19937_64 rng_;
};

/// Two-layer perceptron R^in -> R^hidden -> R^in with LeakyReLU in between.
template <typename T>
struct MixingUnit {
    LinearLayer<T> inner;  // [hidden x in]
    LinearLayer<T> outer;  // [in x hidden]
    T slope = T(0.01);

    static MixingUnit create(std::size_t in, std::size_t hidden, double slope, SeedSequence& seeds) {
        auto inner = LinearLayer<T>::create(in, hidden, seeds.next());
        auto outer = LinearLayer<T>::create(hidden, in, seeds.next());
        return {std::move(inner), std::move(outer), static_cast<T>(slope)};
    }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        inner.collect(prefix + ".inner", out);
        outer.collect(prefix + ".outer", out);
    }
};

template <typename T>
Tensor<T> mixing_unit_forward(const MixingUnit<T>& mu, const Tensor<T>& v) {
    if (v.shape().back() != mu.inner.in_features()) {
        throw ShapeError("mixing unit: input " + shape_str(v.shape()) + " does not end in " +
                         std::to_string(mu.inner.in_features()));
    }
    return linear_forward(mu.outer, leaky_relu(linear_forward(mu.inner, v), mu.slope));
}

template <typename T>
struct ChannelAttentionUnit {
    Tensor<T> attention;  // t, [1 x C]
    LayerNormParams<T> ln;
    MixingUnit<T> mu;

    std::size_t channels() const { return attention.numel(); }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        out.push_back({prefix + ".t", attention});
        ln.collect(prefix + ".ln", out);
        mu.collect(prefix + ".mu", out);
    }
};

template <typename T>
struct TimeMixingUnit {
    LayerNormParams<T> ln;
    MixingUnit<T> mu;

    void collect(const std::string& prefix, ParamList<T>& out) const {
        ln.collect(prefix + ".ln", out);
        mu.collect(prefix + ".mu", out);
    }
};

template <typename T>
struct CamlpBlock {
    ChannelAttentionUnit<T> cau;
    TimeMixingUnit<T> tmu;

    void collect(const std::string& prefix, ParamList<T>& out) const {
        cau.collect(prefix + ".cau", out);
        tmu.collect(prefix + ".tmu", out);
    }
};

template <typename T>
struct LocalEncoder {
    Conv1dLayer<T> conv1;  // 1 -> n
    BatchNorm1d<T> bn1;
    Conv1dLayer<T> conv2;  // n -> 2n
    BatchNorm1d<T> bn2;
    Conv1dLayer<T> conv3;  // 2n -> 4n
    BatchNorm1d<T> bn3;
    Conv1dLayer<T> collapse;  // 4n -> 1, width 1
    std::size_t pool = 3;
    T slope = T(0.01);

    void collect(const std::string& prefix, ParamList<T>& out) const {
        conv1.collect(prefix + ".conv1", out);
        bn1.collect(prefix + ".bn1", out);
        conv2.collect(prefix + ".conv2", out);
        bn2.collect(prefix + ".bn2", out);
        conv3.collect(prefix + ".conv3", out);
        bn3.collect(prefix + ".bn3", out);
        collapse.collect(prefix + ".collapse", out);
    }
};

/// Non-trainable state carried in checkpoints (batch-norm running statistics).
template <typename T>
struct NamedBuffer {
    std::string name;
    std::vector<T>* values;
};

template <typename T>
struct CamlpNet {
    ModelConfig config;
    LocalEncoder<T> encoder;
    std::vector<CamlpBlock<T>> blocks;
    LinearLayer<T> head;  // [num_classes x C]

    bool training() const { return encoder.bn1.training; }

    void set_training(bool flag) {
        encoder.bn1.training = flag;
        encoder.bn2.training = flag;
        encoder.bn3.training = flag;
    }

    ParamList<T> parameters() const {
        ParamList<T> out;
        encoder.collect("encoder", out);
        for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect("blocks." + std::to_string(i), out);
        head.collect("head", out);
        return out;
    }

    std::vector<NamedBuffer<T>> buffers() {
        std::vector<NamedBuffer<T>> out;
        auto add = [&](const char* name, BatchNorm1d<T>& bn) {
            out.push_back({std::string("encoder.") + name + ".running_mean", &bn.running_mean});
            out.push_back({std::string("encoder.") + name + ".running_var", &bn.running_var});
        };
        add("bn1", encoder.bn1);
        add("bn2", encoder.bn2);
        add("bn3", encoder.bn3);
        return out;
    }
};

/// Builds a network with uniform He-initialized weights and zero biases.
/// Norm gains start at 1 and shifts at 0.
template <typename T>
CamlpNet<T> make_camlp_net(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    SeedSequence seeds(seed);
    const std::size_t n = config.filters, k = config.kernel, C = config.channels, L = config.pooled();
    auto bn = [&](std::size_t f) { return BatchNorm1d<T>::create(f, config.bn_momentum, config.bn_eps); };

    CamlpNet<T> net;
    net.config = config;
    net.encoder.conv1 = Conv1dLayer<T>::create(1, n, k, seeds.next());
    net.encoder.bn1 = bn(n);
    net.encoder.conv2 = Conv1dLayer<T>::create(n, 2 * n, k, seeds.next());
    net.encoder.bn2 = bn(2 * n);
    net.encoder.conv3 = Conv1dLayer<T>::create(2 * n, 4 * n, k, seeds.next());
    net.encoder.bn3 = bn(4 * n);
    net.encoder.collapse = Conv1dLayer<T>::create(4 * n, 1, 1, seeds.next());
    net.encoder.pool = k;
    net.encoder.slope = static_cast<T>(config.slope);

    for (std::size_t b = 0; b < config.blocks; ++b) {
        CamlpBlock<T> block;
        block.cau.attention = Tensor<T>({1, C}, kaiming_init<T>({1, C}, C, seeds.next()), true);
        block.cau.ln = LayerNormParams<T>::create(C, config.ln_eps);
        block.cau.mu = MixingUnit<T>::create(C, config.channel_hidden, config.slope, seeds);
        block.tmu.ln = LayerNormParams<T>::create(L, config.ln_eps);
        block.tmu.mu = MixingUnit<T>::create(L, config.time_hidden, config.slope, seeds);
        net.blocks.push_back(std::move(block));
    }
    net.head = LinearLayer<T>::create(C, config.num_classes, seeds.next());
    return net;
}

namespace detail {

inline void require_trailing(const Shape& shape, std::size_t rows, std::size_t cols, const char* what) {
    if (shape.size() < 2 || shape.size() > 3 || shape[shape.size() - 2] != rows || shape.back() != cols) {
        throw ShapeError(std::string(what) + ": expected [" + std::to_string(rows) + "x" + std::to_string(cols) +
                         "] (optionally batched), got " + shape_str(shape));
    }
}

// [1 x C] attention weights viewed with the rank of a [... x L x C] operand.
template <typename T>
Tensor<T> attention_view(const Tensor<T>& t, std::size_t rank) {
    Shape shape(rank, 1);
    shape.back() = t.numel();
    return reshape(t, std::move(shape));
}

}  // namespace detail

/// Channel mixing over the transposed map without attention scaling:
/// x + MU(LayerNorm(xᵀ))ᵀ.
template <typename T>
Tensor<T> plain_channel_mixing_forward(const LayerNormParams<T>& ln, const MixingUnit<T>& mu, const Tensor<T>& x) {
    const std::size_t C = ln.features();
    if (x.rank() < 2 || x.shape()[x.rank() - 2] != C) {
        throw ShapeError("channel mixing: expected [C x L] with C=" + std::to_string(C) + ", got " + shape_str(x.shape()));
    }
    auto z = layer_norm(ln, swap_last_axes(x));
    return add(x, swap_last_axes(mixing_unit_forward(mu, z)));
}

/// Channel attention unit: z1 = t ⊙ LayerNorm(xᵀ), y1 = x + MU(z1)ᵀ.
/// Accepts [C x L] or a batch [B x C x L].
template <typename T>
Tensor<T> cau_forward(const ChannelAttentionUnit<T>& cau, const Tensor<T>& x) {
    const std::size_t C = cau.channels();
    if (x.rank() < 2 || x.rank() > 3 || x.shape()[x.rank() - 2] != C) {
        throw ShapeError("cau: expected [C x L] with C=" + std::to_string(C) + ", got " + shape_str(x.shape()));
    }
    if (cau.ln.features() != C) throw ShapeError("cau: layer norm extent does not match attention length");
    auto xt = swap_last_axes(x);
    auto z1 = mul(layer_norm(cau.ln, xt), detail::attention_view(cau.attention, xt.rank()));
    return add(x, swap_last_axes(mixing_unit_forward(cau.mu, z1)));
}

/// Time mixing unit: y = y1 + MU(LayerNorm(y1)).
template <typename T>
Tensor<T> tmu_forward(const TimeMixingUnit<T>& tmu, const Tensor<T>& y1) {
    const std::size_t L = tmu.ln.features();
    if (y1.rank() < 2 || y1.rank() > 3 || y1.shape().back() != L) {
        throw ShapeError("tmu: expected [C x L] with L=" + std::to_string(L) + ", got " + shape_str(y1.shape()));
    }
    return add(y1, mixing_unit_forward(tmu.mu, layer_norm(tmu.ln, y1)));
}

template <typename T>
Tensor<T> camlp_block_forward(const CamlpBlock<T>& block, const Tensor<T>& x) {
    return tmu_forward(block.tmu, cau_forward(block.cau, x));
}

/// [C x T] -> [C x L] (or batched). EEG channels are treated as a batch of
/// single-feature sequences sharing the convolution weights.
template <typename T>
Tensor<T> local_encoder_forward(LocalEncoder<T>& enc, const Tensor<T>& x) {
    if (x.rank() < 2 || x.rank() > 3) throw ShapeError("local encoder: expected [C x T], got " + shape_str(x.shape()));
    const std::size_t len = x.shape().back();
    if (len < enc.pool) {
        throw ShapeError("local encoder: " + std::to_string(len) + " samples is shorter than pooling size " +
                         std::to_string(enc.pool));
    }
    const std::size_t sequences = x.numel() / len;
    auto h = reshape(x, {sequences, 1, len});
    h = leaky_relu(batch_norm1d(enc.bn1, conv1d_same(enc.conv1, h)), enc.slope);
    h = leaky_relu(batch_norm1d(enc.bn2, conv1d_same(enc.conv2, h)), enc.slope);
    h = avg_pool1d(h, enc.pool);
    h = leaky_relu(batch_norm1d(enc.bn3, conv1d_same(enc.conv3, h)), enc.slope);
    h = conv1d_same(enc.collapse, h);
    Shape out = x.shape();
    out.back() = len / enc.pool;
    return reshape(h, std::move(out));
}

/// Global average pooling over time, then linear C -> classes.
template <typename T>
Tensor<T> classifier_forward(const LinearLayer<T>& head, const Tensor<T>& y) {
    if (y.rank() < 2 || y.rank() > 3 || y.shape()[y.rank() - 2] != head.in_features()) {
        throw ShapeError("classifier: expected [C x L] with C=" + std::to_string(head.in_features()) + ", got " +
                         shape_str(y.shape()));
    }
    return linear_forward(head, reduce_mean(y, y.rank() - 1));
}

/// [C x T] -> logits [classes]; [B x C x T] -> [B x classes].
template <typename T>
Tensor<T> net_forward(CamlpNet<T>& net, const Tensor<T>& x) {
    detail::require_trailing(x.shape(), net.config.channels, net.config.samples, "net");
    auto h = local_encoder_forward(net.encoder, x);
    for (const auto& block : net.blocks) h = camlp_block_forward(block, h);
    return classifier_forward(net.head, h);
}

struct ParamCount {
    std::size_t total = 0;
    std::map<std::string, std::size_t> by_module;  // "encoder", "blocks.i.cau", "blocks.i.tmu", "head"
};

template <typename T>
ParamCount param_count(const CamlpNet<T>& net) {
    ParamCount count;
    for (const auto& p : net.parameters()) {
        std::string module = p.name.substr(0, p.name.find('.'));
        if (module == "blocks") {
            const auto second = p.name.find('.', 7);
            const auto third = p.name.find('.', second + 1);
            module = p.name.substr(0, third);
        }
        count.by_module[module] += p.tensor.numel();
        count.total += p.tensor.numel();
    }
    return count;
}

template <typename T>
std::size_t param_count(const MixingUnit<T>& mu) {
    ParamList<T> list;
    mu.collect("mu", list);
    std::size_t total = 0;
    for (const auto& p : list) total += p.tensor.numel();
    return total;
}

}  // namespace camlp
