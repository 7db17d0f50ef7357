#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "camlp/checkpoint.hpp"
#include "camlp/data.hpp"
#include "camlp/errors.hpp"
#include "camlp/model.hpp"
#include "camlp/report.hpp"
#include "camlp/train.hpp"

namespace camlp {

struct RunConfig {
    std::string data;
    std::string out = "run";
    std::string model;
    std::uint64_t seed = 1;

    std::size_t folds = 5;
    std::size_t epochs = 100;
    double learning_rate = 0.001;
    double momentum = 0.9;
    std::size_t batch_size = 64;
    std::size_t window = 150;
    std::size_t overlap = 10;
    std::size_t precision = 32;
    std::size_t threads = 1;

    std::size_t blocks = 4;
    std::size_t kernel = 3;
    std::size_t filters = 4;
    std::size_t channel_hidden = 256;
    std::size_t time_hidden = 128;
    double slope = 0.01;

    std::size_t sweep_min = 1;
    std::size_t sweep_max = 6;

    std::size_t synth_classes = 3;
    std::size_t synth_trials_per_class = 20;
    std::size_t synth_channels = 62;
    std::size_t synth_samples = 800;
    double synth_rate_hz = 200.0;
    double synth_noise = 0.5;
    double synth_amplitude = 1.0;

    double gradcheck_tolerance = 1e-4;

    bool operator==(const RunConfig&) const = default;
};

using KeyValues = std::map<std::string, std::string>;

namespace detail {

using FieldPtr = std::conditional_t<
    std::is_same_v<std::size_t, std::uint64_t>,
    std::variant<std::string RunConfig::*, std::size_t RunConfig::*, double RunConfig::*>,
    std::variant<std::string RunConfig::*, std::size_t RunConfig::*, std::uint64_t RunConfig::*, double RunConfig::*>>;

struct ConfigField {
    const char* key;
    FieldPtr member;
};

inline const std::vector<ConfigField>& config_fields() {
    static const std::vector<ConfigField> fields = {
        {"data", &RunConfig::data},
        {"out", &RunConfig::out},
        {"model", &RunConfig::model},
        {"seed", &RunConfig::seed},
        {"folds", &RunConfig::folds},
        {"epochs", &RunConfig::epochs},
        {"learning_rate", &RunConfig::learning_rate},
        {"momentum", &RunConfig::momentum},
        {"batch_size", &RunConfig::batch_size},
        {"window", &RunConfig::window},
        {"overlap", &RunConfig::overlap},
        {"precision", &RunConfig::precision},
        {"threads", &RunConfig::threads},
        {"blocks", &RunConfig::blocks},
        {"kernel", &RunConfig::kernel},
        {"filters", &RunConfig::filters},
        {"channel_hidden", &RunConfig::channel_hidden},
        {"time_hidden", &RunConfig::time_hidden},
        {"slope", &RunConfig::slope},
        {"sweep_min", &RunConfig::sweep_min},
        {"sweep_max", &RunConfig::sweep_max},
        {"synth_classes", &RunConfig::synth_classes},
        {"synth_trials_per_class", &RunConfig::synth_trials_per_class},
        {"synth_channels", &RunConfig::synth_channels},
        {"synth_samples", &RunConfig::synth_samples},
        {"synth_rate_hz", &RunConfig::synth_rate_hz},
        {"synth_noise", &RunConfig::synth_noise},
        {"synth_amplitude", &RunConfig::synth_amplitude},
        {"gradcheck_tolerance", &RunConfig::gradcheck_tolerance},
    };
    return fields;
}

inline std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

template <typename U>
bool parse_unsigned(const std::string& text, U& value) {
    if (text.empty() || text.front() == '-' || text.front() == '+') return false;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    return ec == std::errc() && ptr == text.data() + text.size();
}

inline bool parse_real(const std::string& text, double& value) {
    if (text.empty()) return false;
    const char* begin = text.data() + (text.front() == '+' ? 1 : 0);
    auto [ptr, ec] = std::from_chars(begin, text.data() + text.size(), value);
    return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(value);
}

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline const ConfigField& find_field(const std::string& key) {
    for (const auto& f : config_fields())
        if (key == f.key) return f;
    throw ConfigError("unknown config key '" + key + "'");
}

inline void assign_field(RunConfig& config, const std::string& key, const std::string& raw) {
    const auto& field = find_field(key);
    const std::string text = trim(raw);
    std::visit(
        [&](auto member) {
            using V = std::remove_reference_t<decltype(config.*member)>;
            if constexpr (std::is_same_v<V, std::string>) {
                config.*member = text;
            } else if constexpr (std::is_same_v<V, double>) {
                if (!parse_real(text, config.*member))
                    throw ConfigError("config key '" + key + "' expects a real number, got '" + text + "'");
            } else {
                if (!parse_unsigned(text, config.*member))
                    throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + text + "'");
            }
        },
        field.member);
}

}  // namespace detail

/// Parses flat `key = value` text. Blank lines and lines starting with '#' or
/// ';' are ignored. Keys are checked against RunConfig field names.
inline KeyValues parse_config_text(const std::string& text, const std::string& origin = "config") {
    KeyValues values;
    std::istringstream in(text);
    std::string line;
    for (std::size_t number = 1; std::getline(in, line); ++number) {
        const std::string body = detail::trim(line);
        if (body.empty() || body.front() == '#' || body.front() == ';') continue;
        const auto eq = body.find('=');
        const std::string where = origin + ":" + std::to_string(number);
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + body + "'");
        const std::string key = detail::trim(std::string_view(body).substr(0, eq));
        if (key.empty()) throw ConfigError(where + ": missing key");
        detail::find_field(key);
        if (!values.emplace(key, detail::trim(std::string_view(body).substr(eq + 1))).second)
            throw ConfigError(where + ": duplicate key '" + key + "'");
    }
    return values;
}

inline KeyValues read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config_text(text.str(), path.string());
}

inline void validate_run_config(const RunConfig& c) {
    auto require = [](bool ok, const std::string& key, const std::string& what) {
        if (!ok) throw ConfigError("config key '" + key + "' " + what);
    };
    require(c.folds >= 2, "folds", "must be >= 2");
    require(c.batch_size >= 1, "batch_size", "must be >= 1");
    require(c.learning_rate >= 0, "learning_rate", "must be >= 0");
    require(c.momentum >= 0 && c.momentum < 1, "momentum", "must be in [0, 1)");
    require(c.window >= 1, "window", "must be >= 1");
    require(c.overlap < c.window, "overlap", "must be smaller than window");
    require(c.precision == 32 || c.precision == 64, "precision", "must be 32 or 64");
    require(c.threads >= 1, "threads", "must be >= 1");
    require(c.blocks >= 1, "blocks", "must be >= 1");
    require(c.kernel % 2 == 1, "kernel", "must be odd");
    require(c.filters >= 1, "filters", "must be >= 1");
    require(c.channel_hidden >= 1, "channel_hidden", "must be >= 1");
    require(c.time_hidden >= 1, "time_hidden", "must be >= 1");
    require(c.slope >= 0, "slope", "must be >= 0");
    require(c.sweep_min >= 1 && c.sweep_min <= c.sweep_max, "sweep_min", "must satisfy 1 <= sweep_min <= sweep_max");
    require(c.synth_classes >= 1, "synth_classes", "must be >= 1");
    require(c.synth_trials_per_class >= 1, "synth_trials_per_class", "must be >= 1");
    require(c.synth_channels >= 2, "synth_channels", "must be >= 2");
    require(c.synth_samples >= 1, "synth_samples", "must be >= 1");
    require(c.synth_rate_hz > 0, "synth_rate_hz", "must be > 0");
    require(c.synth_noise >= 0, "synth_noise", "must be >= 0");
    require(c.gradcheck_tolerance > 0, "gradcheck_tolerance", "must be > 0");
}

/// defaults, then the config file, then command-line flags; later layers win.
inline RunConfig resolve_config(const RunConfig& defaults, const std::optional<std::filesystem::path>& file,
                                const KeyValues& flags) {
    RunConfig config = defaults;
    if (file)
        for (const auto& [key, value] : read_config_file(*file)) detail::assign_field(config, key, value);
    for (const auto& [key, value] : flags) detail::assign_field(config, key, value);
    validate_run_config(config);
    return config;
}

/// Every key, in declaration order; feeding this back through resolve_config
/// reproduces the same RunConfig.
inline std::string format_config(const RunConfig& config) {
    std::string out;
    for (const auto& field : detail::config_fields()) {
        out += field.key;
        out += " = ";
        std::visit(
            [&](auto member) {
                using V = std::remove_cvref_t<decltype(config.*member)>;
                if constexpr (std::is_same_v<V, std::string>) out += config.*member;
                else if constexpr (std::is_same_v<V, double>) out += detail::format_real(config.*member);
                else out += std::to_string(config.*member);
            },
            field.member);
        out += "\n";
    }
    return out;
}

inline ModelConfig model_config_of(const RunConfig& c) {
    ModelConfig m;
    m.samples = c.window;
    m.kernel = c.kernel;
    m.filters = c.filters;
    m.blocks = c.blocks;
    m.channel_hidden = c.channel_hidden;
    m.time_hidden = c.time_hidden;
    m.slope = c.slope;
    return m;
}

inline TrainConfig train_config_of(const RunConfig& c) {
    TrainConfig t;
    t.lr = c.learning_rate;
    t.momentum = c.momentum;
    t.batch_size = c.batch_size;
    t.epochs = c.epochs;
    t.seed = mix_seed(c.seed, 1);
    return t;
}

inline CvOptions cv_options_of(const RunConfig& c) {
    CvOptions o;
    o.folds = c.folds;
    o.window = c.window;
    o.overlap = c.overlap;
    o.fold_seed = c.seed;
    o.threads = c.threads;
    return o;
}

inline SynthSpec synth_spec_of(const RunConfig& c) {
    auto spec = SynthSpec::separable(static_cast<int>(c.synth_classes), c.synth_trials_per_class, c.synth_channels,
                                     c.synth_noise, c.seed, c.synth_amplitude);
    spec.samples = c.synth_samples;
    spec.sample_rate_hz = c.synth_rate_hz;
    return spec;
}

namespace detail {

inline bool path_within(const std::filesystem::path& inner, const std::filesystem::path& outer) {
    auto [mi, mo] = std::mismatch(inner.begin(), inner.end(), outer.begin(), outer.end());
    return mo == outer.end();
}

/// Creates the output directory, refusing any location inside the dataset.
inline std::filesystem::path prepare_output(const RunConfig& c) {
    namespace fs = std::filesystem;
    if (c.out.empty()) throw ConfigError("config key 'out' must name an output directory");
    const fs::path out = fs::weakly_canonical(fs::absolute(c.out));
    if (!c.data.empty()) {
        fs::path data = fs::weakly_canonical(fs::absolute(c.data));
        if (fs::is_regular_file(data)) data = data.parent_path();
        if (path_within(out, data))
            throw ConfigError("output directory " + out.string() + " lies inside the data directory " + data.string());
    }
    fs::create_directories(out);
    write_text_file(out / "config.ini", format_config(c));
    return out;
}

inline Dataset require_dataset(const RunConfig& c) {
    if (c.data.empty()) throw ConfigError("config key 'data' is required for this command");
    return load_dataset(c.data);
}

inline std::string trial_predictions_csv(const std::vector<const Trial*>& trials,
                                         const std::vector<TrialPrediction>& preds) {
    std::string out = "trial_id,label,predicted";
    if (!preds.empty())
        for (std::size_t c = 0; c < preds.front().probabilities.size(); ++c) out += ",prob_" + std::to_string(c);
    out += "\n";
    for (std::size_t i = 0; i < trials.size(); ++i) {
        out += trials[i]->id + "," + std::to_string(trials[i]->label) + "," + std::to_string(preds[i].label);
        for (double p : preds[i].probabilities) out += "," + fmt_fixed(p);
        out += "\n";
    }
    return out;
}

template <typename T>
std::vector<Metrics> evaluate_dataset(CamlpNet<T>& net, const Dataset& ds, const RunConfig& c,
                                      std::vector<TrialPrediction>* predictions = nullptr) {
    std::vector<int> slice_pred, slice_true, trial_pred, trial_true;
    for (const auto& trial : ds.trials) {
        auto pred = ensemble_predict_trial(net, trial, c.window, c.overlap);
        trial_pred.push_back(pred.label);
        trial_true.push_back(trial.label);
        for (const auto& p : pred.slice_probabilities) {
            slice_pred.push_back(argmax_lowest(p));
            slice_true.push_back(trial.label);
        }
        if (predictions) predictions->push_back(std::move(pred));
    }
    const auto classes = static_cast<std::size_t>(ds.info.num_classes);
    return {compute_metrics(slice_pred, slice_true, classes, MetricLevel::slice),
            compute_metrics(trial_pred, trial_true, classes, MetricLevel::trial)};
}

inline void check_dataset_nonempty(const Dataset& ds) {
    if (ds.trials.empty()) throw DataError("dataset holds no trials");
}

inline int cmd_synth(const RunConfig& c, std::ostream& out) {
    const auto dir = prepare_output(c);
    const auto ds = synth_generate(synth_spec_of(c));
    save_dataset(ds, dir);
    out << "wrote " << ds.trials.size() << " trials (" << ds.info.channels << "x" << ds.info.samples << ") to "
        << dir.string() << "\n";
    return 0;
}

inline int cmd_segment(const RunConfig& c, std::ostream& out) {
    const auto ds = require_dataset(c);
    const auto dir = prepare_output(c);
    std::ofstream bin(dir / "slices.f64", std::ios::binary);
    if (!bin) throw DataError("cannot open " + (dir / "slices.f64").string() + " for writing");
    std::string index = "slice,trial_id,label,offset,channels,samples\n";
    std::size_t count = 0;
    for (const auto& trial : ds.trials) {
        for (const auto& s : prepare_slices(trial, c.window, c.overlap)) {
            index += std::to_string(count++) + "," + s.trial_id + "," + std::to_string(s.label) + "," +
                     std::to_string(s.offset) + "," + std::to_string(s.channels) + "," + std::to_string(s.samples) +
                     "\n";
            for (double v : s.values) write_le<double>(bin, v);
        }
    }
    if (!bin) throw DataError("failed writing slices");
    write_text_file(dir / "slices.csv", index);
    out << "wrote " << count << " standardized slices to " << dir.string() << "\n";
    return 0;
}

template <typename T>
int cmd_train(const RunConfig& c, std::ostream& out, std::ostream& log) {
    const auto ds = require_dataset(c);
    check_dataset_nonempty(ds);
    const auto dir = prepare_output(c);
    ModelConfig mc = model_config_of(c);
    mc.channels = ds.info.channels;
    mc.num_classes = static_cast<std::size_t>(ds.info.num_classes);
    mc.validate();
    std::vector<Slice> slices;
    for (const auto& trial : ds.trials)
        for (auto& s : prepare_slices(trial, c.window, c.overlap)) slices.push_back(std::move(s));
    auto net = make_camlp_net<T>(mc, mix_seed(c.seed, 0));
    log << "training on " << slices.size() << " slices for " << c.epochs << " epochs\n";
    const auto history = train_model(net, slices, train_config_of(c));
    save_checkpoint(net, dir / "model.ckpt");
    write_text_file(dir / "loss.csv", loss_csv(history.epoch_loss));
    const auto metrics = evaluate_dataset(net, ds, c);
    write_text_file(dir / "metrics.csv", single_metrics_csv(metrics, mc.num_classes));
    out << "training-set fit\n";
    for (const auto& m : metrics) out << metrics_table(m);
    out << "checkpoint: " << (dir / "model.ckpt").string() << "\n";
    return 0;
}

template <typename T>
int cmd_eval(const RunConfig& c, std::ostream& out) {
    if (c.model.empty()) throw ConfigError("config key 'model' is required for eval");
    const auto ds = require_dataset(c);
    check_dataset_nonempty(ds);
    auto net = load_checkpoint<T>(c.model);
    if (net.config.channels != ds.info.channels)
        throw ConfigError("checkpoint expects " + std::to_string(net.config.channels) + " channels, dataset has " +
                          std::to_string(ds.info.channels));
    if (net.config.samples != c.window)
        throw ConfigError("checkpoint was trained on window " + std::to_string(net.config.samples) +
                          ", config key 'window' is " + std::to_string(c.window));
    if (net.config.num_classes != static_cast<std::size_t>(ds.info.num_classes))
        throw ConfigError("checkpoint predicts " + std::to_string(net.config.num_classes) +
                          " classes, dataset declares " + std::to_string(ds.info.num_classes));
    const auto dir = prepare_output(c);
    net.set_training(false);
    std::vector<TrialPrediction> preds;
    const auto metrics = evaluate_dataset(net, ds, c, &preds);
    std::vector<const Trial*> trials;
    for (const auto& t : ds.trials) trials.push_back(&t);
    write_text_file(dir / "metrics.csv", single_metrics_csv(metrics, net.config.num_classes));
    write_text_file(dir / "predictions.csv", trial_predictions_csv(trials, preds));
    for (const auto& m : metrics) out << metrics_table(m);
    return 0;
}

template <typename T>
CvReport cv_with_logging(const Dataset& ds, const RunConfig& c, std::ostream& log) {
    log << "cross-validating N=" << c.blocks << " over " << c.folds << " folds (" << ds.trials.size()
        << " trials)\n";
    return run_cv<T>(ds, model_config_of(c), train_config_of(c), cv_options_of(c));
}

template <typename T>
int cmd_cv(const RunConfig& c, std::ostream& out, std::ostream& log) {
    const auto ds = require_dataset(c);
    check_dataset_nonempty(ds);
    const auto dir = prepare_output(c);
    const auto report = cv_with_logging<T>(ds, c, log);
    const auto classes = static_cast<std::size_t>(ds.info.num_classes);
    write_text_file(dir / "metrics.csv", cv_metrics_csv(report, classes));
    write_text_file(dir / "folds.csv", fold_plan_csv(report.plan, ds));
    for (const auto& f : report.folds)
        write_text_file(dir / ("loss_fold" + std::to_string(f.fold) + ".csv"), loss_csv(f.loss_curve));
    const auto table = cv_table(report);
    write_text_file(dir / "report.txt", table);
    out << table;
    return 0;
}

template <typename T>
int cmd_sweep(const RunConfig& c, std::ostream& out, std::ostream& log) {
    const auto ds = require_dataset(c);
    check_dataset_nonempty(ds);
    const auto dir = prepare_output(c);
    std::vector<SweepRow> rows;
    for (std::size_t n = c.sweep_min; n <= c.sweep_max; ++n) {
        RunConfig run = c;
        run.blocks = n;
        const auto report = cv_with_logging<T>(ds, run, log);
        write_text_file(dir / ("metrics_N" + std::to_string(n) + ".csv"),
                        cv_metrics_csv(report, static_cast<std::size_t>(ds.info.num_classes)));
        rows.push_back({n, report.summary});
    }
    write_text_file(dir / "sweep.csv", sweep_csv(rows));
    const auto table = sweep_table(rows);
    write_text_file(dir / "report.txt", table);
    out << table;
    return 0;
}

inline int cmd_gradcheck(const RunConfig& c, std::ostream& out) {
    const auto dir = prepare_output(c);
    GradCheckOptions options;
    options.tolerance = c.gradcheck_tolerance;
    options.seed = c.seed;
    const auto report = grad_check(tiny_model_config(), options);
    write_text_file(dir / "gradcheck.csv", gradcheck_csv(report));
    out << gradcheck_table(report);
    return report.passed() ? 0 : 1;
}

struct FlagSpec {
    const char* flag;
    const char* key;
    const char* help;
};

inline const std::vector<FlagSpec>& common_flags() {
    static const std::vector<FlagSpec> flags = {
        {"--out", "out", "output directory"},
        {"--seed", "seed", "seed for data generation, fold assignment and training"},
    };
    return flags;
}

inline const std::vector<FlagSpec>& data_flags() {
    static const std::vector<FlagSpec> flags = {
        {"--data", "data", "dataset directory or manifest.json"},
        {"--window", "window", "slice length in samples (default 150)"},
        {"--overlap", "overlap", "overlap between consecutive slices (default 10)"},
    };
    return flags;
}

inline const std::vector<FlagSpec>& training_flags() {
    static const std::vector<FlagSpec> flags = {
        {"--epochs", "epochs", "training epochs"},
        {"--lr", "learning_rate", "SGD learning rate"},
        {"--momentum", "momentum", "SGD momentum"},
        {"--batch", "batch_size", "minibatch size"},
        {"--blocks", "blocks", "number of CAMLP blocks N"},
        {"--kernel", "kernel", "conv kernel and pooling size k"},
        {"--filters", "filters", "base filter count n"},
        {"--channel-hidden", "channel_hidden", "channel-mixing hidden width D"},
        {"--time-hidden", "time_hidden", "time-mixing hidden width H"},
        {"--slope", "slope", "LeakyReLU negative slope"},
        {"--precision", "precision", "scalar precision, 32 or 64"},
    };
    return flags;
}

inline const std::vector<FlagSpec>& synth_flags() {
    static const std::vector<FlagSpec> flags = {
        {"--classes", "synth_classes", "number of classes"},
        {"--trials-per-class", "synth_trials_per_class", "trials per class"},
        {"--channels", "synth_channels", "channels per trial"},
        {"--samples", "synth_samples", "samples per trial"},
        {"--rate", "synth_rate_hz", "sample rate in Hz"},
        {"--noise", "synth_noise", "white-noise standard deviation"},
        {"--amplitude", "synth_amplitude", "sinusoid amplitude"},
    };
    return flags;
}

}  // namespace detail

/// Entry point for the `camlp` tool. Returns the process exit status.
inline int run_command(int argc, const char* const* argv, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
    CLI::App app{"CAMLP-Net: channel-attention MLP-Mixer for EEG motor-imagery classification", "camlp"};
    app.require_subcommand(1);
    app.fallthrough(false);

    KeyValues flags;
    std::string config_path;
    auto add_flags = [&](CLI::App* sub, const std::vector<detail::FlagSpec>& specs) {
        for (const auto& spec : specs) {
            const std::string key = spec.key;
            sub->add_option_function<std::string>(
                   spec.flag, [&flags, key](const std::string& v) { flags[key] = v; }, spec.help)
                ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        }
    };
    auto add_sub = [&](const char* name, const char* description) {
        auto* sub = app.add_subcommand(name, description);
        sub->add_option("--config", config_path, "flat key = value config file");
        add_flags(sub, detail::common_flags());
        return sub;
    };

    auto* synth = add_sub("synth", "generate a synthetic separable dataset");
    add_flags(synth, detail::synth_flags());

    auto* segment = add_sub("segment", "write standardized slices of a dataset");
    add_flags(segment, detail::data_flags());

    auto* train = add_sub("train", "train on every trial of a dataset and save a checkpoint");
    add_flags(train, detail::data_flags());
    add_flags(train, detail::training_flags());

    auto* eval = add_sub("eval", "evaluate a checkpoint with trial-level ensembling");
    add_flags(eval, detail::data_flags());
    add_flags(eval, {{"--model", "model", "checkpoint file"}, {"--precision", "precision", "32 or 64"}});

    auto* cv = add_sub("cv", "trial-level stratified k-fold cross-validation");
    add_flags(cv, detail::data_flags());
    add_flags(cv, detail::training_flags());
    add_flags(cv, {{"--folds", "folds", "number of folds"}, {"--threads", "threads", "folds trained in parallel"}});

    auto* sweep = add_sub("sweep-blocks", "cross-validate each block count N in [min, max]");
    add_flags(sweep, detail::data_flags());
    add_flags(sweep, detail::training_flags());
    add_flags(sweep, {{"--folds", "folds", "number of folds"},
                      {"--threads", "threads", "folds trained in parallel"},
                      {"--min", "sweep_min", "smallest N"},
                      {"--max", "sweep_max", "largest N"}});

    auto* gradcheck = add_sub("gradcheck", "finite-difference gradient check on a tiny network");
    add_flags(gradcheck, {{"--tolerance", "gradcheck_tolerance", "max relative error"}});

    if (argc > 1 && argv[1][0] != '-') {
        bool known = false;
        for (const auto* sub : app.get_subcommands({})) known = known || sub->check_name(argv[1]);
        if (!known) {
            err << "error: unknown subcommand '" << argv[1] << "'\n" << app.help();
            return 2;
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        const std::optional<std::filesystem::path> file =
            config_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_path);
        const RunConfig config = resolve_config(RunConfig{}, file, flags);
        const bool wide = config.precision == 64;
        if (synth->parsed()) return detail::cmd_synth(config, out);
        if (segment->parsed()) return detail::cmd_segment(config, out);
        if (train->parsed())
            return wide ? detail::cmd_train<double>(config, out, err) : detail::cmd_train<float>(config, out, err);
        if (eval->parsed()) return wide ? detail::cmd_eval<double>(config, out) : detail::cmd_eval<float>(config, out);
        if (cv->parsed())
            return wide ? detail::cmd_cv<double>(config, out, err) : detail::cmd_cv<float>(config, out, err);
        if (sweep->parsed())
            return wide ? detail::cmd_sweep<double>(config, out, err) : detail::cmd_sweep<float>(config, out, err);
        if (gradcheck->parsed()) return detail::cmd_gradcheck(config, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    err << app.help();
    return 2;
}

inline int run_command(const std::vector<std::string>& args, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
    std::vector<const char*> argv{"camlp"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_command(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace camlp
