#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "camlp/data.hpp"
#include "camlp/model.hpp"
#include "camlp/nn.hpp"

namespace camlp {

struct TrainConfig {
    double lr = 0.001;
    double momentum = 0.9;
    std::size_t batch_size = 64;
    std::size_t epochs = 100;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(lr >= 0.0)) throw ContractError("train config: lr must be non-negative");
        if (!(momentum >= 0.0 && momentum < 1.0)) throw ContractError("train config: momentum must be in [0, 1)");
        if (batch_size < 1) throw ContractError("train config: batch_size must be >= 1");
    }
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// SGD with heavy-ball momentum: v <- mu*v + g; theta <- theta - lr*v.

template <typename T>
struct SgdState {
    std::vector<std::vector<T>> velocity;
};

template <typename T>
std::vector<Tensor<T>> tensors_of(const ParamList<T>& params) {
    std::vector<Tensor<T>> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(p.tensor);
    return out;
}

/// Applies one update and zeroes the gradients.
template <typename T>
void sgd_momentum_step(SgdState<T>& state, std::span<Tensor<T>> params, T lr, T momentum) {
    if (state.velocity.empty()) {
        for (const auto& p : params) state.velocity.emplace_back(p.numel(), T(0));
    }
    if (state.velocity.size() != params.size()) throw ContractError("sgd: optimizer state tracks a different parameter set");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].has_grad()) throw ContractError("sgd: parameter " + std::to_string(i) + " has no gradient");
        if (state.velocity[i].size() != params[i].numel()) throw ContractError("sgd: velocity shape mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& v = state.velocity[i];
        auto theta = params[i].mutable_data();
        auto grad = params[i].mutable_grad();
        for (std::size_t j = 0; j < v.size(); ++j) {
            v[j] = momentum * v[j] + grad[j];
            theta[j] -= lr * v[j];
        }
        params[i].zero_grad();
    }
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> make_batch(std::span<const Slice* const> slices) {
    if (slices.empty()) throw ContractError("make_batch: empty batch");
    const std::size_t C = slices.front()->channels, L = slices.front()->samples;
    std::vector<T> values;
    values.reserve(slices.size() * C * L);
    for (const Slice* s : slices) {
        if (s->channels != C || s->samples != L) throw ShapeError("make_batch: slices differ in shape");
        for (double v : s->values) values.push_back(static_cast<T>(v));
    }
    return Tensor<T>({slices.size(), C, L}, std::move(values));
}

struct TrainHistory {
    std::vector<double> epoch_loss;  // slice-weighted mean loss per epoch
};

using BatchObserver = std::function<void(std::span<const Slice* const>)>;

/// Minibatch SGD over shuffled slices. Batch norm runs in train mode and the
/// network is left in eval mode on return.
template <typename T>
TrainHistory train_model(CamlpNet<T>& net, const std::vector<Slice>& slices, const TrainConfig& config,
                         const BatchObserver& observer = {}) {
    config.validate();
    if (slices.empty()) throw ContractError("train: no training slices");
    for (const auto& s : slices) {
        if (s.channels != net.config.channels || s.samples != net.config.samples)
            throw ShapeError("train: slice from " + s.trial_id + " does not match the model input shape");
        if (s.label < 0 || static_cast<std::size_t>(s.label) >= net.config.num_classes)
            throw ContractError("train: slice label out of range");
    }

    auto params = tensors_of(net.parameters());
    for (auto& p : params) p.zero_grad();
    SgdState<T> state;
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(slices.size());
    std::iota(order.begin(), order.end(), 0);

    TrainHistory history;
    net.set_training(true);
    std::vector<const Slice*> batch;
    std::vector<int> targets;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            batch.clear();
            targets.clear();
            for (std::size_t i = start; i < stop; ++i) {
                batch.push_back(&slices[order[i]]);
                targets.push_back(slices[order[i]].label);
            }
            if (observer) observer(batch);
            auto loss = softmax_cross_entropy(net_forward(net, make_batch<T>(batch)), std::span<const int>(targets));
            loss.backward();
            sgd_momentum_step(state, std::span<Tensor<T>>(params), static_cast<T>(config.lr),
                              static_cast<T>(config.momentum));
            total += static_cast<double>(loss.item()) * static_cast<double>(batch.size());
        }
        history.epoch_loss.push_back(total / static_cast<double>(slices.size()));
    }
    net.set_training(false);
    return history;
}

// ---------------------------------------------------------------------------
// Inference

/// Softmax probabilities per slice; the network must be in eval mode.
template <typename T>
std::vector<std::vector<double>> predict_slice_probabilities(CamlpNet<T>& net, const std::vector<Slice>& slices,
                                                             std::size_t chunk = 64) {
    if (net.training()) throw ContractError("predict: network must be in eval mode");
    std::vector<std::vector<double>> out;
    out.reserve(slices.size());
    std::vector<const Slice*> batch;
    for (std::size_t start = 0; start < slices.size(); start += chunk) {
        batch.clear();
        for (std::size_t i = start; i < std::min(slices.size(), start + chunk); ++i) batch.push_back(&slices[i]);
        for (auto& p : softmax_rows(net_forward(net, make_batch<T>(batch)))) out.push_back(std::move(p));
    }
    return out;
}

inline int argmax_lowest(std::span<const double> values) {
    int best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
}

struct TrialPrediction {
    int label = 0;
    std::vector<double> probabilities;
    std::vector<std::vector<double>> slice_probabilities;
};

/// Arithmetic mean of slice probability vectors, argmax with ties broken
/// toward the lowest class index.
inline TrialPrediction ensemble_average(std::vector<std::vector<double>> slice_probabilities) {
    if (slice_probabilities.empty()) throw ContractError("ensemble: no slice predictions");
    TrialPrediction pred;
    pred.probabilities.assign(slice_probabilities.front().size(), 0.0);
    for (const auto& p : slice_probabilities) {
        if (p.size() != pred.probabilities.size()) throw ShapeError("ensemble: probability vectors differ in length");
        for (std::size_t c = 0; c < p.size(); ++c) pred.probabilities[c] += p[c];
    }
    for (auto& p : pred.probabilities) p /= static_cast<double>(slice_probabilities.size());
    pred.label = argmax_lowest(pred.probabilities);
    pred.slice_probabilities = std::move(slice_probabilities);
    return pred;
}

template <typename T>
TrialPrediction ensemble_predict_trial(CamlpNet<T>& net, const Trial& trial, std::size_t window, std::size_t overlap) {
    if (trial.samples < window) {
        throw ContractError("ensemble: trial " + trial.id + " is shorter than the window");
    }
    return ensemble_average(predict_slice_probabilities(net, prepare_slices(trial, window, overlap)));
}

// ---------------------------------------------------------------------------
// Metrics

enum class MetricLevel { slice, trial };

inline const char* level_name(MetricLevel level) { return level == MetricLevel::slice ? "slice" : "trial"; }

struct Metrics {
    MetricLevel level = MetricLevel::slice;
    std::size_t count = 0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<double> f1;
    std::vector<std::size_t> support;
    std::vector<std::vector<std::size_t>> confusion;  // [actual][predicted]
};

/// Accuracy, per-class precision/recall/F1 and their unweighted (macro) F1
/// mean. Undefined ratios (zero denominators) count as 0.
inline Metrics compute_metrics(std::span<const int> predictions, std::span<const int> labels, std::size_t num_classes,
                               MetricLevel level = MetricLevel::slice) {
    if (predictions.size() != labels.size()) throw ContractError("metrics: predictions and labels differ in length");
    if (labels.empty()) throw ContractError("metrics: no predictions");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || predictions[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes ||
            static_cast<std::size_t>(predictions[i]) >= num_classes)
            throw ContractError("metrics: class index outside [0, " + std::to_string(num_classes) + ")");
    }
    Metrics m;
    m.level = level;
    m.count = labels.size();
    m.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        ++m.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])];
        correct += labels[i] == predictions[i];
    }
    m.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
    for (std::size_t c = 0; c < num_classes; ++c) {
        std::size_t tp = m.confusion[c][c], actual = 0, predicted = 0;
        for (std::size_t j = 0; j < num_classes; ++j) {
            actual += m.confusion[c][j];
            predicted += m.confusion[j][c];
        }
        const double p = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        const double r = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
        m.precision.push_back(p);
        m.recall.push_back(r);
        m.f1.push_back(p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0);
        m.support.push_back(actual);
    }
    m.macro_f1 = std::accumulate(m.f1.begin(), m.f1.end(), 0.0) / static_cast<double>(num_classes);
    return m;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for a single value
};

inline MeanStd mean_std(std::span<const double> values) {
    MeanStd out;
    if (values.empty()) return out;
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return out;
}

struct CvOptions {
    std::size_t folds = 5;
    std::size_t window = 150;
    std::size_t overlap = 10;
    std::uint64_t fold_seed = 0;
    std::size_t threads = 1;
};

struct FoldResult {
    std::size_t fold = 0;
    Metrics slice_metrics;
    Metrics trial_metrics;
    std::vector<double> loss_curve;
    std::set<std::string> trained_trial_ids;  // every trial id seen in a training batch
    std::set<std::string> held_out_trial_ids;
    std::vector<std::size_t> held_out_per_class;
    std::size_t train_slices = 0;
};

struct CvSummary {
    MeanStd slice_accuracy;
    MeanStd slice_macro_f1;
    MeanStd trial_accuracy;
    MeanStd trial_macro_f1;
};

struct CvReport {
    FoldPlan plan;
    std::vector<FoldResult> folds;
    CvSummary summary;
};

template <typename T>
FoldResult run_fold(const Dataset& dataset, const FoldPlan& plan, std::size_t fold, const ModelConfig& model_config,
                    const TrainConfig& train_config, const CvOptions& options) {
    FoldResult result;
    result.fold = fold;
    result.held_out_per_class.assign(static_cast<std::size_t>(dataset.info.num_classes), 0);

    std::vector<Slice> train_slices;
    std::vector<const Trial*> held_out;
    for (const auto& trial : dataset.trials) {
        if (plan.fold_of(trial.id) == fold) {
            held_out.push_back(&trial);
            result.held_out_trial_ids.insert(trial.id);
            ++result.held_out_per_class[static_cast<std::size_t>(trial.label)];
        } else {
            for (auto& s : prepare_slices(trial, options.window, options.overlap)) train_slices.push_back(std::move(s));
        }
    }
    result.train_slices = train_slices.size();

    TrainConfig fold_train = train_config;
    fold_train.seed = mix_seed(train_config.seed, 2 * fold + 1);
    auto net = make_camlp_net<T>(model_config, mix_seed(train_config.seed, 2 * fold));
    auto history = train_model(net, train_slices, fold_train, [&](std::span<const Slice* const> batch) {
        for (const Slice* s : batch) result.trained_trial_ids.insert(s->trial_id);
    });
    result.loss_curve = std::move(history.epoch_loss);

    std::vector<int> slice_pred, slice_true, trial_pred, trial_true;
    for (const Trial* trial : held_out) {
        auto pred = ensemble_predict_trial(net, *trial, options.window, options.overlap);
        trial_pred.push_back(pred.label);
        trial_true.push_back(trial->label);
        for (const auto& p : pred.slice_probabilities) {
            slice_pred.push_back(argmax_lowest(p));
            slice_true.push_back(trial->label);
        }
    }
    const auto classes = static_cast<std::size_t>(dataset.info.num_classes);
    result.slice_metrics = compute_metrics(slice_pred, slice_true, classes, MetricLevel::slice);
    result.trial_metrics = compute_metrics(trial_pred, trial_true, classes, MetricLevel::trial);
    return result;
}

/// Trial-level stratified k-fold: train on k-1 folds' slices, evaluate the
/// held-out trials by ensemble. Folds are independent and run on up to
/// `options.threads` worker threads; results do not depend on the thread count.
template <typename T>
CvReport run_cv(const Dataset& dataset, ModelConfig model_config, const TrainConfig& train_config,
                const CvOptions& options) {
    train_config.validate();
    model_config.channels = dataset.info.channels;
    model_config.samples = options.window;
    model_config.num_classes = static_cast<std::size_t>(dataset.info.num_classes);
    model_config.validate();

    CvReport report;
    report.plan = stratified_trial_kfold(dataset.trials, options.folds, options.fold_seed);
    report.folds.resize(options.folds);

    const std::size_t workers = std::max<std::size_t>(1, std::min(options.threads, options.folds));
    if (workers == 1) {
        for (std::size_t f = 0; f < options.folds; ++f)
            report.folds[f] = run_fold<T>(dataset, report.plan, f, model_config, train_config, options);
    } else {
        std::vector<std::exception_ptr> errors(options.folds);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t f = w; f < options.folds; f += workers) {
                    try {
                        report.folds[f] = run_fold<T>(dataset, report.plan, f, model_config, train_config, options);
                    } catch (...) {
                        errors[f] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    std::vector<double> sa, sf, ta, tf;
    for (const auto& f : report.folds) {
        sa.push_back(f.slice_metrics.accuracy);
        sf.push_back(f.slice_metrics.macro_f1);
        ta.push_back(f.trial_metrics.accuracy);
        tf.push_back(f.trial_metrics.macro_f1);
    }
    report.summary = {mean_std(sa), mean_std(sf), mean_std(ta), mean_std(tf)};
    return report;
}

// ---------------------------------------------------------------------------
// Gradient check

inline ModelConfig tiny_model_config() {
    ModelConfig c;
    c.channels = 4;
    c.samples = 18;
    c.kernel = 3;
    c.filters = 2;
    c.blocks = 1;
    c.channel_hidden = 8;
    c.time_hidden = 6;
    c.num_classes = 3;
    return c;
}

struct GradGroupReport {
    std::string name;
    std::size_t size = 0;
    double max_rel_error = 0.0;
    bool passed = false;
};

struct GradCheckReport {
    double tolerance = 0.0;
    std::vector<GradGroupReport> groups;

    bool passed() const {
        return !groups.empty() && std::all_of(groups.begin(), groups.end(), [](const auto& g) { return g.passed; });
    }
};

struct GradCheckOptions {
    double tolerance = 1e-4;
    double step = 1e-5;
    // Gradients smaller than this are compared in absolute terms.
    double magnitude_floor = 1e-5;
    std::size_t batch = 2;
    std::uint64_t seed = 1;
    // Test hook applied to the analytic gradients before comparison.
    std::function<void(ParamList<double>&)> tamper;
};

/// Compares analytic gradients of the batch cross-entropy loss against central
/// differences for every named parameter, in double precision with batch norm
/// in train mode. Error per element is |a - n| / max(|a|, |n|, floor).
inline GradCheckReport grad_check(const ModelConfig& config, const GradCheckOptions& options = {}) {
    auto net = make_camlp_net<double>(config, options.seed);
    net.set_training(true);
    std::mt19937_64 rng(mix_seed(options.seed, 99));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> input(options.batch * config.channels * config.samples);
    for (auto& v : input) v = normal(rng);
    std::vector<int> targets(options.batch);
    for (std::size_t i = 0; i < targets.size(); ++i)
        targets[i] = static_cast<int>(i % config.num_classes);
    const Tensor<double> x({options.batch, config.channels, config.samples}, input);

    auto loss_of = [&] { return softmax_cross_entropy(net_forward(net, x), std::span<const int>(targets)).item(); };

    auto params = net.parameters();
    for (auto& p : params) p.tensor.zero_grad();
    softmax_cross_entropy(net_forward(net, x), std::span<const int>(targets)).backward();
    if (options.tamper) options.tamper(params);

    GradCheckReport report;
    report.tolerance = options.tolerance;
    for (auto& p : params) {
        GradGroupReport group;
        group.name = p.name;
        group.size = p.tensor.numel();
        Tensor<double> handle = p.tensor;
        auto values = handle.mutable_data();
        const std::vector<double> analytic(handle.grad().begin(), handle.grad().end());
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + options.step;
            const double up = loss_of();
            values[i] = saved - options.step;
            const double down = loss_of();
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * options.step);
            const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.magnitude_floor});
            const double err = std::abs(analytic[i] - numeric) / denom;
            group.max_rel_error = std::max(group.max_rel_error, std::isfinite(err) ? err : std::numeric_limits<double>::infinity());
        }
        group.passed = group.max_rel_error < options.tolerance;
        report.groups.push_back(std::move(group));
    }
    return report;
}

}  // namespace camlp
