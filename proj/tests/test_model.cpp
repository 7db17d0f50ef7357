#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <vector>

#include "camlp/checkpoint.hpp"
#include "camlp/model.hpp"
#include "camlp/train.hpp"
#include "test_util.hpp"

using namespace camlp;
using camlp::testing::finite_difference_check;
using camlp::testing::random_tensor;
using camlp::testing::TempDir;
using camlp::testing::TensorD;

namespace {

std::vector<double> values_of(const TensorD& t) { return {t.data().begin(), t.data().end()}; }

void fill(TensorD t, double v) { std::fill(t.mutable_data().begin(), t.mutable_data().end(), v); }

void zero_mixing(MixingUnit<double>& mu) {
    fill(mu.inner.weight, 0);
    fill(mu.inner.bias, 0);
    fill(mu.outer.weight, 0);
    fill(mu.outer.bias, 0);
}

ModelConfig small_config(std::size_t blocks = 2) {
    ModelConfig c;
    c.channels = 5;
    c.samples = 12;
    c.kernel = 3;
    c.filters = 2;
    c.blocks = blocks;
    c.channel_hidden = 7;
    c.time_hidden = 6;
    c.num_classes = 3;
    return c;
}

MixingUnit<double> random_mixing(std::size_t in, std::size_t hidden, std::uint64_t seed) {
    SeedSequence seeds(seed);
    auto mu = MixingUnit<double>::create(in, hidden, 0.01, seeds);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.5);
    for (auto* t : {&mu.inner.bias, &mu.outer.bias})
        for (auto& v : t->mutable_data()) v = normal(rng);
    return mu;
}

// Plain-loop reference implementations, independent of the tensor engine.
std::vector<double> oracle_layer_norm(const std::vector<double>& row, const TensorD& gamma, const TensorD& beta,
                                      double eps) {
    const double n = static_cast<double>(row.size());
    double m = 0;
    for (double v : row) m += v;
    m /= n;
    double var = 0;
    for (double v : row) var += (v - m) * (v - m);
    var /= n;
    std::vector<double> out(row.size());
    for (std::size_t i = 0; i < row.size(); ++i)
        out[i] = gamma.data()[i] * (row[i] - m) / std::sqrt(var + eps) + beta.data()[i];
    return out;
}

std::vector<double> oracle_linear(const std::vector<double>& v, const LinearLayer<double>& layer) {
    const std::size_t out = layer.out_features(), in = layer.in_features();
    std::vector<double> y(out);
    for (std::size_t o = 0; o < out; ++o) {
        double s = layer.bias.data()[o];
        for (std::size_t i = 0; i < in; ++i) s += layer.weight.data()[o * in + i] * v[i];
        y[o] = s;
    }
    return y;
}

std::vector<double> oracle_mixing(const std::vector<double>& v, const MixingUnit<double>& mu) {
    auto h = oracle_linear(v, mu.inner);
    for (auto& x : h) x = x >= 0 ? x : mu.slope * x;
    return oracle_linear(h, mu.outer);
}

// x: [C x L] row-major
std::vector<double> oracle_cau(const std::vector<double>& x, std::size_t C, std::size_t L,
                               const ChannelAttentionUnit<double>& cau) {
    std::vector<double> y = x;
    for (std::size_t l = 0; l < L; ++l) {
        std::vector<double> column(C);
        for (std::size_t c = 0; c < C; ++c) column[c] = x[c * L + l];
        auto z = oracle_layer_norm(column, cau.ln.gamma, cau.ln.beta, cau.ln.eps);
        for (std::size_t c = 0; c < C; ++c) z[c] *= cau.attention.data()[c];
        auto m = oracle_mixing(z, cau.mu);
        for (std::size_t c = 0; c < C; ++c) y[c * L + l] += m[c];
    }
    return y;
}

std::vector<double> oracle_tmu(const std::vector<double>& x, std::size_t C, std::size_t L,
                               const TimeMixingUnit<double>& tmu) {
    std::vector<double> y = x;
    for (std::size_t c = 0; c < C; ++c) {
        std::vector<double> row(x.begin() + static_cast<long>(c * L), x.begin() + static_cast<long>((c + 1) * L));
        auto m = oracle_mixing(oracle_layer_norm(row, tmu.ln.gamma, tmu.ln.beta, tmu.ln.eps), tmu.mu);
        for (std::size_t l = 0; l < L; ++l) y[c * L + l] += m[l];
    }
    return y;
}

ChannelAttentionUnit<double> random_cau(std::size_t C, std::size_t D, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ChannelAttentionUnit<double> cau;
    cau.attention = random_tensor({1, C}, rng);
    cau.ln = LayerNormParams<double>::create(C);
    for (auto& v : cau.ln.gamma.mutable_data()) v = 1.0 + 0.2 * std::normal_distribution<double>()(rng);
    for (auto& v : cau.ln.beta.mutable_data()) v = 0.2 * std::normal_distribution<double>()(rng);
    cau.mu = random_mixing(C, D, seed + 1);
    return cau;
}

TimeMixingUnit<double> random_tmu(std::size_t L, std::size_t H, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    TimeMixingUnit<double> tmu;
    tmu.ln = LayerNormParams<double>::create(L);
    for (auto& v : tmu.ln.gamma.mutable_data()) v = 1.0 + 0.2 * std::normal_distribution<double>()(rng);
    for (auto& v : tmu.ln.beta.mutable_data()) v = 0.2 * std::normal_distribution<double>()(rng);
    tmu.mu = random_mixing(L, H, seed + 1);
    return tmu;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST(MixingUnit, ZeroOuterGivesZero) {
    auto mu = random_mixing(3, 4, 1);
    fill(mu.outer.weight, 0);
    fill(mu.outer.bias, 0);
    std::mt19937_64 rng(1);
    for (double v : values_of(mixing_unit_forward(mu, random_tensor({2, 3}, rng, false)))) EXPECT_EQ(v, 0.0);
}

TEST(MixingUnit, ZeroInnerGivesOuterBias) {
    auto mu = random_mixing(3, 4, 2);
    fill(mu.inner.weight, 0);
    fill(mu.inner.bias, 0);
    std::mt19937_64 rng(2);
    auto y = mixing_unit_forward(mu, random_tensor({2, 3}, rng, false));
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(y.at({r, i}), mu.outer.bias.data()[i]);
}

TEST(MixingUnit, HandEvaluation) {
    MixingUnit<double> mu;
    mu.inner = {TensorD({2, 2}, {1, 0, 0, 1}, true), TensorD({2}, {0, 0}, true)};
    mu.outer = {TensorD({2, 2}, {2, 0, 0, 2}, true), TensorD({2}, {1, 1}, true)};
    mu.slope = 0.01;
    EXPECT_EQ(values_of(mixing_unit_forward(mu, TensorD({2}, {1, 0}))), (std::vector<double>{3, 1}));
}

TEST(MixingUnit, ExtentMismatch) {
    auto mu = random_mixing(3, 4, 3);
    EXPECT_THROW(mixing_unit_forward(mu, TensorD::zeros({2, 4})), ShapeError);
}

TEST(MixingUnit, ParamCount) {
    SeedSequence seeds(1);
    EXPECT_EQ(param_count(MixingUnit<double>::create(2, 3, 0.01, seeds)), 17u);
}

// ---------------------------------------------------------------------------

TEST(ChannelAttention, ZeroMixingIsResidualIdentity) {
    auto cau = random_cau(4, 6, 5);
    zero_mixing(cau.mu);
    std::mt19937_64 rng(5);
    auto x = random_tensor({4, 7}, rng, false);
    EXPECT_EQ(values_of(cau_forward(cau, x)), values_of(x));
}

TEST(ChannelAttention, UnitAttentionDegeneratesToPlainMixing) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        auto cau = random_cau(5, 8, 100 + static_cast<std::uint64_t>(trial));
        fill(cau.attention, 1.0);
        auto x = random_tensor({5, 9}, rng, false);
        auto with_t = values_of(cau_forward(cau, x));
        auto without_t = values_of(plain_channel_mixing_forward(cau.ln, cau.mu, x));
        for (std::size_t i = 0; i < with_t.size(); ++i) EXPECT_NEAR(with_t[i], without_t[i], 1e-12);
    }
}

TEST(ChannelAttention, MatchesOracle) {
    for (auto [C, L] : std::vector<std::pair<std::size_t, std::size_t>>{{2, 1}, {3, 4}, {6, 5}}) {
        auto cau = random_cau(C, 5, 7 + C);
        std::mt19937_64 rng(C * 31 + L);
        auto x = random_tensor({C, L}, rng, false);
        auto got = values_of(cau_forward(cau, x));
        auto expect = oracle_cau(values_of(x), C, L, cau);
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expect[i], 1e-10) << "C=" << C << " L=" << L;
    }
}

TEST(ChannelAttention, BatchedMatchesPerSample) {
    auto cau = random_cau(3, 4, 8);
    std::mt19937_64 rng(8);
    auto x = random_tensor({2, 3, 5}, rng, false);
    auto batched = values_of(cau_forward(cau, x));
    for (std::size_t b = 0; b < 2; ++b) {
        std::vector<double> xs(x.data().begin() + static_cast<long>(b * 15), x.data().begin() + static_cast<long>((b + 1) * 15));
        auto single = values_of(cau_forward(cau, TensorD({3, 5}, xs)));
        for (std::size_t i = 0; i < 15; ++i) EXPECT_NEAR(batched[b * 15 + i], single[i], 1e-14);
    }
}

TEST(ChannelAttention, ShapeMismatch) {
    auto cau = random_cau(4, 6, 9);
    EXPECT_THROW(cau_forward(cau, TensorD::zeros({3, 7})), ShapeError);
    EXPECT_THROW(cau_forward(cau, TensorD::zeros({4})), ShapeError);
}

TEST(ChannelAttention, AttentionReceivesGradient) {
    auto net = make_camlp_net<double>(small_config(), 3);
    std::mt19937_64 rng(10);
    auto x = random_tensor({4, 5, 12}, rng, false);
    const int targets[] = {0, 1, 2, 1};
    softmax_cross_entropy(net_forward(net, x), targets).backward();
    for (const auto& block : net.blocks) {
        ASSERT_TRUE(block.cau.attention.has_grad());
        double norm = 0;
        for (double g : block.cau.attention.grad()) norm += g * g;
        EXPECT_GT(norm, 0.0);
    }
}

// ---------------------------------------------------------------------------

TEST(TimeMixing, ZeroMixingIsResidualIdentity) {
    auto tmu = random_tmu(6, 4, 11);
    zero_mixing(tmu.mu);
    std::mt19937_64 rng(11);
    auto x = random_tensor({3, 6}, rng, false);
    EXPECT_EQ(values_of(tmu_forward(tmu, x)), values_of(x));
}

TEST(TimeMixing, PreservesShape) {
    auto tmu = random_tmu(50, 128, 12);
    std::mt19937_64 rng(12);
    EXPECT_EQ(tmu_forward(tmu, random_tensor({62, 50}, rng, false)).shape(), (Shape{62, 50}));
    EXPECT_THROW(tmu_forward(tmu, TensorD::zeros({62, 49})), ShapeError);
}

TEST(TimeMixing, MatchesOracle) {
    for (auto [C, L] : std::vector<std::pair<std::size_t, std::size_t>>{{1, 2}, {3, 5}}) {
        auto tmu = random_tmu(L, 4, 13 + L);
        std::mt19937_64 rng(C + L);
        auto x = random_tensor({C, L}, rng, false);
        auto got = values_of(tmu_forward(tmu, x));
        auto expect = oracle_tmu(values_of(x), C, L, tmu);
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expect[i], 1e-10);
    }
}

// ---------------------------------------------------------------------------

TEST(CamlpBlock, ZeroMixingIsIdentityAndComposes) {
    auto net = make_camlp_net<double>(small_config(4), 4);
    for (auto& block : net.blocks) {
        zero_mixing(block.cau.mu);
        zero_mixing(block.tmu.mu);
    }
    std::mt19937_64 rng(14);
    auto x = random_tensor({5, 4}, rng, false);
    EXPECT_EQ(values_of(camlp_block_forward(net.blocks[0], x)), values_of(x));
    auto h = x;
    for (const auto& block : net.blocks) h = camlp_block_forward(block, h);
    EXPECT_EQ(values_of(h), values_of(x));
}

TEST(CamlpBlock, InputGradientMatchesFiniteDifference) {
    auto net = make_camlp_net<double>(small_config(1), 5);
    std::mt19937_64 rng(15);
    std::vector<TensorD> in{random_tensor({5, 4}, rng)};
    auto r = finite_difference_check(in, [&] { return sum(camlp_block_forward(net.blocks[0], in[0])); });
    EXPECT_GT(r.analytic_norm, 0.0);
    EXPECT_TRUE(std::isfinite(r.analytic_norm));
    EXPECT_LT(r.rel_error, 1e-6);
}

// ---------------------------------------------------------------------------

TEST(LocalEncoder, PaperShape) {
    ModelConfig c;  // C=62, T=150, k=3
    auto net = make_camlp_net<double>(c, 1);
    std::mt19937_64 rng(16);
    EXPECT_EQ(local_encoder_forward(net.encoder, random_tensor({62, 150}, rng, false)).shape(), (Shape{62, 50}));
    EXPECT_THROW(local_encoder_forward(net.encoder, TensorD::zeros({62, 2})), ShapeError);
}

TEST(LocalEncoder, ZeroNetworkGivesZero) {
    auto net = make_camlp_net<double>(small_config(), 2);
    auto& e = net.encoder;
    for (auto* conv : {&e.conv1, &e.conv2, &e.conv3, &e.collapse}) {
        fill(conv->kernels, 0);
        fill(conv->bias, 0);
    }
    for (auto* bn : {&e.bn1, &e.bn2, &e.bn3}) fill(bn->gamma, 0);
    std::mt19937_64 rng(17);
    for (double v : values_of(local_encoder_forward(e, random_tensor({5, 12}, rng, false)))) EXPECT_EQ(v, 0.0);
}

TEST(LocalEncoder, ChannelPermutationEquivariance) {
    for (bool training : {false, true}) {
        auto net = make_camlp_net<double>(small_config(), 6);
        net.set_training(training);
        std::mt19937_64 rng(18);
        auto x = random_tensor({5, 12}, rng, false);
        const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
        std::vector<double> px(x.numel());
        for (std::size_t c = 0; c < 5; ++c)
            for (std::size_t t = 0; t < 12; ++t) px[c * 12 + t] = x.at({perm[c], t});
        auto y = local_encoder_forward(net.encoder, x);
        auto py = local_encoder_forward(net.encoder, TensorD({5, 12}, px));
        for (std::size_t c = 0; c < 5; ++c)
            for (std::size_t l = 0; l < 4; ++l) EXPECT_NEAR(py.at({c, l}), y.at({perm[c], l}), 1e-12);
    }
}

TEST(CamlpNet, FullNetIsNotChannelPermutationInvariant) {
    auto net = make_camlp_net<double>(small_config(), 7);
    net.set_training(false);
    std::mt19937_64 rng(19);
    auto x = random_tensor({5, 12}, rng, false);
    std::vector<double> px(x.numel());
    const std::vector<std::size_t> perm{1, 2, 3, 4, 0};
    for (std::size_t c = 0; c < 5; ++c)
        for (std::size_t t = 0; t < 12; ++t) px[c * 12 + t] = x.at({perm[c], t});
    auto a = values_of(net_forward(net, x)), b = values_of(net_forward(net, TensorD({5, 12}, px)));
    double diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
    EXPECT_GT(diff, 1e-6);
}

// ---------------------------------------------------------------------------

TEST(Classifier, ZeroWeightsGiveBias) {
    LinearLayer<double> head{TensorD::zeros({3, 4}, true), TensorD({3}, {0.5, -1, 2}, true)};
    EXPECT_EQ(values_of(classifier_forward(head, TensorD::full({4, 6}, 2.0))), (std::vector<double>{0.5, -1, 2}));
}

TEST(Classifier, SingleColumnPoolingIsIdentity) {
    LinearLayer<double> head{TensorD({2, 2}, {1, 0, 0, 1}, true), TensorD::zeros({2}, true)};
    EXPECT_EQ(values_of(classifier_forward(head, TensorD({2, 1}, {3, -4}))), (std::vector<double>{3, -4}));
}

TEST(Classifier, HandComputedTwoByTwo) {
    // y = [[1,3],[2,6]] -> pooled [2,4]; W = [[1,2],[0,-1]], b = [1,0] -> [11,-4]
    LinearLayer<double> head{TensorD({2, 2}, {1, 2, 0, -1}, true), TensorD({2}, {1, 0}, true)};
    EXPECT_EQ(values_of(classifier_forward(head, TensorD({2, 2}, {1, 3, 2, 6}))), (std::vector<double>{11, -4}));
    EXPECT_THROW(classifier_forward(head, TensorD::zeros({3, 2})), ShapeError);
}

// ---------------------------------------------------------------------------

TEST(CamlpNet, LogitsLengthAcrossBlockSweep) {
    for (std::size_t n = 1; n <= 6; ++n) {
        auto net = make_camlp_net<double>(small_config(n), n);
        EXPECT_EQ(net.blocks.size(), n);
        std::mt19937_64 rng(n);
        EXPECT_EQ(net_forward(net, random_tensor({5, 12}, rng, false)).shape(), (Shape{3}));
        EXPECT_EQ(net_forward(net, random_tensor({2, 5, 12}, rng, false)).shape(), (Shape{2, 3}));
    }
}

TEST(CamlpNet, TinyConfigGradientCheck) {
    const auto report = grad_check(tiny_model_config());
    EXPECT_TRUE(report.passed());
    for (const auto& g : report.groups) EXPECT_LT(g.max_rel_error, 1e-4) << g.name;
}

TEST(CamlpNet, DeterministicForSeed) {
    std::mt19937_64 rng(20);
    auto x = random_tensor({5, 12}, rng, false);
    auto a = make_camlp_net<float>(small_config(), 42);
    auto b = make_camlp_net<float>(small_config(), 42);
    Tensor<float> xf({5, 12}, std::vector<float>(x.data().begin(), x.data().end()));
    auto la = net_forward(a, xf), lb = net_forward(b, xf);
    EXPECT_EQ(std::memcmp(la.data().data(), lb.data().data(), la.numel() * sizeof(float)), 0);
    auto c = make_camlp_net<float>(small_config(), 43);
    auto lc = net_forward(c, xf);
    EXPECT_NE(std::vector<float>(la.data().begin(), la.data().end()),
              std::vector<float>(lc.data().begin(), lc.data().end()));
}

TEST(CamlpNet, ShapeMismatch) {
    auto net = make_camlp_net<double>(small_config(), 1);
    EXPECT_THROW(net_forward(net, TensorD::zeros({4, 12})), ShapeError);
    EXPECT_THROW(net_forward(net, TensorD::zeros({5, 11})), ShapeError);
}

TEST(ModelConfig, Validation) {
    ModelConfig c = small_config();
    EXPECT_NO_THROW(c.validate());
    c.kernel = 4;
    EXPECT_THROW(c.validate(), ContractError);
    c = small_config();
    c.channels = 1;
    EXPECT_THROW(c.validate(), ContractError);
    c = small_config();
    c.samples = 2;
    EXPECT_THROW(c.validate(), ContractError);
}

// ---------------------------------------------------------------------------

TEST(ParamCount, ItemizedPerModule) {
    const auto c = small_config(2);
    auto net = make_camlp_net<double>(c, 1);
    const auto count = param_count(net);
    const std::size_t C = c.channels, L = c.pooled(), D = c.channel_hidden, H = c.time_hidden, n = c.filters;
    const std::size_t cau = C + 2 * C + (C * D + D + D * C + C);
    const std::size_t tmu = 2 * L + (L * H + H + H * L + L);
    const std::size_t encoder = (n * 3 + n) + 2 * n + (2 * n * n * 3 + 2 * n) + 4 * n + (4 * n * 2 * n * 3 + 4 * n) +
                                8 * n + (4 * n + 1);
    const std::size_t head = C * c.num_classes + c.num_classes;
    EXPECT_EQ(count.by_module.at("blocks.0.cau"), cau);
    EXPECT_EQ(count.by_module.at("blocks.1.tmu"), tmu);
    EXPECT_EQ(count.by_module.at("encoder"), encoder);
    EXPECT_EQ(count.by_module.at("head"), head);
    EXPECT_EQ(count.total, encoder + 2 * (cau + tmu) + head);
}

TEST(ParamCount, AttentionContributesChannels) {
    auto net = make_camlp_net<double>(small_config(3), 1);
    for (const auto& block : net.blocks) EXPECT_EQ(block.cau.attention.numel(), 5u);
}

TEST(ParamCount, DoublingBlocksDoublesBlockParameters) {
    auto block_params = [](std::size_t n) {
        const auto count = param_count(make_camlp_net<double>(small_config(n), 1));
        std::size_t total = 0;
        for (const auto& [name, v] : count.by_module)
            if (name.rfind("blocks.", 0) == 0) total += v;
        return total;
    };
    EXPECT_EQ(block_params(4), 2 * block_params(2));
}

// ---------------------------------------------------------------------------

template <typename T>
void expect_round_trip() {
    TempDir dir("ckpt");
    auto net = make_camlp_net<T>(small_config(2), 77);
    net.encoder.bn2.running_mean[1] = static_cast<T>(0.123);
    net.encoder.bn3.running_var[0] = static_cast<T>(4.5);
    save_checkpoint(net, dir / "m.ckpt");
    auto loaded = load_checkpoint<T>(dir / "m.ckpt");
    EXPECT_EQ(loaded.config, net.config);
    const auto a = net.parameters(), b = loaded.parameters();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].name, b[i].name);
        EXPECT_EQ(a[i].tensor.shape(), b[i].tensor.shape());
        EXPECT_EQ(std::memcmp(a[i].tensor.data().data(), b[i].tensor.data().data(), a[i].tensor.numel() * sizeof(T)), 0)
            << a[i].name;
    }
    auto ba = net.buffers(), bb = loaded.buffers();
    for (std::size_t i = 0; i < ba.size(); ++i) EXPECT_EQ(*ba[i].values, *bb[i].values) << ba[i].name;
}

TEST(Checkpoint, RoundTripIsBitExact) {
    expect_round_trip<float>();
    expect_round_trip<double>();
}

TEST(Checkpoint, LoadsAcrossPrecision) {
    TempDir dir("ckpt");
    auto net = make_camlp_net<float>(small_config(1), 5);
    save_checkpoint(net, dir / "m.ckpt");
    auto wide = load_checkpoint<double>(dir / "m.ckpt");
    const auto a = net.parameters();
    const auto b = wide.parameters();
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].tensor.numel(); ++j)
            EXPECT_EQ(static_cast<double>(a[i].tensor.data()[j]), b[i].tensor.data()[j]);
}

TEST(Checkpoint, RejectsCorruptFiles) {
    TempDir dir("ckpt");
    auto net = make_camlp_net<float>(small_config(1), 5);
    save_checkpoint(net, dir / "m.ckpt");
    const auto bytes = camlp::testing::read_file(dir / "m.ckpt");

    {
        std::ofstream out(dir / "bad_magic.ckpt", std::ios::binary);
        out << "XXXXXX" << bytes.substr(6);
    }
    EXPECT_THROW(load_checkpoint<float>(dir / "bad_magic.ckpt"), DataError);
    {
        std::ofstream out(dir / "short.ckpt", std::ios::binary);
        out << bytes.substr(0, bytes.size() / 2);
    }
    EXPECT_THROW(load_checkpoint<float>(dir / "short.ckpt"), DataError);
    EXPECT_THROW(load_checkpoint<float>(dir / "missing.ckpt"), DataError);
}
