#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "camlp/binary_io.hpp"
#include "camlp/errors.hpp"

namespace camlp {

/// One raw recording: channels x samples, row-major.
struct Trial {
    std::string id;
    int label = 0;
    std::size_t channels = 0;
    std::size_t samples = 0;
    std::vector<float> values;

    float at(std::size_t c, std::size_t t) const { return values[c * samples + t]; }
};

/// A fixed-length window cut from a trial.
struct Slice {
    std::string trial_id;
    int label = 0;
    std::size_t offset = 0;
    std::size_t channels = 0;
    std::size_t samples = 0;
    std::vector<double> values;

    double at(std::size_t c, std::size_t t) const { return values[c * samples + t]; }
};

struct DatasetInfo {
    int num_classes = 0;
    std::size_t channels = 0;
    std::size_t samples = 0;  // T_raw
    double sample_rate_hz = 200.0;
};

struct Dataset {
    DatasetInfo info;
    std::vector<Trial> trials;
};

// ---------------------------------------------------------------------------
// Dataset directory: manifest.json plus one raw little-endian float32 file per
// trial (row-major C x T_raw, no header).

inline constexpr const char* kManifestName = "manifest.json";

inline Dataset load_dataset(const std::filesystem::path& location) {
    namespace fs = std::filesystem;
    const fs::path manifest = fs::is_directory(location) ? location / kManifestName : location;
    std::ifstream in(manifest);
    if (!in) throw DataError("manifest not found: " + manifest.string());

    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest " + manifest.string() + " is not valid JSON: " + e.what());
    }

    Dataset ds;
    try {
        ds.info.num_classes = doc.at("num_classes").get<int>();
        ds.info.channels = doc.at("C").get<std::size_t>();
        ds.info.samples = doc.at("T_raw").get<std::size_t>();
        ds.info.sample_rate_hz = doc.at("sample_rate_hz").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest " + manifest.string() + ": " + e.what());
    }
    if (ds.info.num_classes < 1 || ds.info.channels < 1 || ds.info.samples < 1)
        throw DataError("manifest " + manifest.string() + ": num_classes, C and T_raw must be positive");

    const fs::path root = manifest.parent_path();
    const std::size_t expected = ds.info.channels * ds.info.samples;
    std::set<std::string> seen;
    for (const auto& entry : doc.value("trials", nlohmann::json::array())) {
        Trial trial;
        std::string file;
        try {
            trial.id = entry.at("id").get<std::string>();
            trial.label = entry.at("label").get<int>();
            file = entry.at("file").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw DataError("manifest trial entry malformed: " + std::string(e.what()));
        }
        if (!seen.insert(trial.id).second) throw DataError("trial " + trial.id + ": duplicate id");
        if (trial.label < 0 || trial.label >= ds.info.num_classes) {
            throw DataError("trial " + trial.id + ": unknown label " + std::to_string(trial.label));
        }
        const fs::path path = root / file;
        std::ifstream data(path, std::ios::binary);
        if (!data) throw DataError("trial " + trial.id + ": missing sample file " + path.string());
        const auto bytes = fs::file_size(path);
        if (bytes != expected * sizeof(float)) {
            const auto held = bytes / sizeof(float);
            std::string held_desc = std::to_string(held) + " values";
            if (held % ds.info.samples == 0)
                held_desc = std::to_string(held / ds.info.samples) + "x" + std::to_string(ds.info.samples);
            throw DataError("trial " + trial.id + ": shape mismatch, manifest declares " +
                            std::to_string(ds.info.channels) + "x" + std::to_string(ds.info.samples) +
                            " but file holds " + held_desc);
        }
        trial.channels = ds.info.channels;
        trial.samples = ds.info.samples;
        trial.values.resize(expected);
        for (auto& v : trial.values) v = detail::read_le<float>(data, "trial " + trial.id);
        ds.trials.push_back(std::move(trial));
    }
    return ds;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json doc;
    doc["num_classes"] = ds.info.num_classes;
    doc["C"] = ds.info.channels;
    doc["T_raw"] = ds.info.samples;
    doc["sample_rate_hz"] = ds.info.sample_rate_hz;
    doc["trials"] = nlohmann::json::array();
    for (std::size_t i = 0; i < ds.trials.size(); ++i) {
        const Trial& trial = ds.trials[i];
        if (trial.channels != ds.info.channels || trial.samples != ds.info.samples ||
            trial.values.size() != trial.channels * trial.samples) {
            throw DataError("trial " + trial.id + ": shape does not match dataset header");
        }
        char name[32];
        std::snprintf(name, sizeof(name), "trial_%05zu.f32", i);
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw DataError("cannot write " + (dir / name).string());
        for (float v : trial.values) detail::write_le<float>(out, v);
        doc["trials"].push_back({{"id", trial.id}, {"label", trial.label}, {"file", name}});
    }
    std::ofstream out(dir / kManifestName);
    if (!out) throw DataError("cannot write manifest in " + dir.string());
    out << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

/// Windows start at 0, stride, 2*stride, ... with stride = window - overlap;
/// samples that do not fill a final window are dropped.
inline std::vector<Slice> sliding_window_segment(const Trial& trial, std::size_t window, std::size_t overlap) {
    if (window == 0) throw ContractError("segment: window must be >= 1");
    if (overlap >= window) throw ContractError("segment: overlap must be smaller than window");
    if (window > trial.samples) {
        throw ContractError("segment: trial " + trial.id + " has " + std::to_string(trial.samples) +
                            " samples, shorter than window " + std::to_string(window));
    }
    const std::size_t stride = window - overlap;
    const std::size_t count = (trial.samples - window) / stride + 1;
    std::vector<Slice> slices;
    slices.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Slice s;
        s.trial_id = trial.id;
        s.label = trial.label;
        s.offset = i * stride;
        s.channels = trial.channels;
        s.samples = window;
        s.values.resize(trial.channels * window);
        for (std::size_t c = 0; c < trial.channels; ++c)
            for (std::size_t t = 0; t < window; ++t) s.values[c * window + t] = trial.at(c, s.offset + t);
        slices.push_back(std::move(s));
    }
    return slices;
}

inline constexpr double kZscoreEps = 1e-8;

/// Per-channel (x - mean) / max(std, eps) with the population std.
inline Slice zscore_standardize(Slice slice) {
    if (slice.samples < 2) throw ContractError("zscore: slice needs at least 2 samples");
    const std::size_t T = slice.samples;
    for (std::size_t c = 0; c < slice.channels; ++c) {
        double* row = slice.values.data() + c * T;
        double m = 0.0;
        for (std::size_t t = 0; t < T; ++t) m += row[t];
        m /= static_cast<double>(T);
        double v = 0.0;
        for (std::size_t t = 0; t < T; ++t) v += (row[t] - m) * (row[t] - m);
        const double sd = std::max(std::sqrt(v / static_cast<double>(T)), kZscoreEps);
        for (std::size_t t = 0; t < T; ++t) row[t] = (row[t] - m) / sd;
    }
    return slice;
}

inline std::vector<Slice> prepare_slices(const Trial& trial, std::size_t window, std::size_t overlap) {
    auto slices = sliding_window_segment(trial, window, overlap);
    for (auto& s : slices) s = zscore_standardize(std::move(s));
    return slices;
}

// ---------------------------------------------------------------------------

struct FoldPlan {
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::map<std::string, std::size_t> assignment;  // trial id -> fold

    std::size_t fold_of(const std::string& trial_id) const {
        auto it = assignment.find(trial_id);
        if (it == assignment.end()) throw ContractError("fold plan: unknown trial " + trial_id);
        return it->second;
    }

    bool operator==(const FoldPlan&) const = default;
};

/// Per class, trials are shuffled by `seed` and dealt round-robin into k folds.
/// Each class continues dealing where the previous class stopped so that fold
/// sizes also stay within one of each other.
inline FoldPlan stratified_trial_kfold(const std::vector<Trial>& trials, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ContractError("kfold: k must be >= 2");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < trials.size(); ++i) by_class[trials[i].label].push_back(i);
    for (const auto& [label, members] : by_class) {
        if (members.size() < k) {
            throw ContractError("kfold: class " + std::to_string(label) + " has " + std::to_string(members.size()) +
                                " trials, fewer than k=" + std::to_string(k));
        }
    }
    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    std::mt19937_64 rng(seed);
    std::size_t next_fold = 0;
    for (auto& [label, members] : by_class) {
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t idx : members) {
            if (!plan.assignment.emplace(trials[idx].id, next_fold).second)
                throw ContractError("kfold: duplicate trial id " + trials[idx].id);
            next_fold = (next_fold + 1) % k;
        }
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Synthetic motor-imagery stand-in: each class drives a sinusoid on its own
// channel subset; white noise everywhere.

struct ClassSignature {
    std::vector<std::size_t> channels;
    double frequency_hz = 10.0;
    double amplitude = 1.0;
};

struct SynthSpec {
    int num_classes = 3;
    std::size_t trials_per_class = 20;
    std::size_t channels = 8;
    std::size_t samples = 800;
    double sample_rate_hz = 200.0;
    std::vector<ClassSignature> signatures;
    double noise_std = 0.5;
    std::uint64_t seed = 0;

    /// Class c drives channels [c*m, (c+1)*m) at 6*(c+1) Hz, m = C / (classes+1),
    /// leaving at least one noise-only block.
    static SynthSpec separable(int num_classes, std::size_t trials_per_class, std::size_t channels, double noise_std,
                               std::uint64_t seed, double amplitude = 1.0) {
        SynthSpec spec;
        spec.num_classes = num_classes;
        spec.trials_per_class = trials_per_class;
        spec.channels = channels;
        spec.noise_std = noise_std;
        spec.seed = seed;
        const std::size_t block = std::max<std::size_t>(1, channels / static_cast<std::size_t>(num_classes + 1));
        for (int c = 0; c < num_classes; ++c) {
            ClassSignature sig;
            for (std::size_t i = 0; i < block; ++i) sig.channels.push_back((static_cast<std::size_t>(c) * block + i) % channels);
            sig.frequency_hz = 6.0 * (c + 1);
            sig.amplitude = amplitude;
            spec.signatures.push_back(sig);
        }
        return spec;
    }

    void validate() const {
        if (num_classes < 1) throw ContractError("synth: num_classes must be >= 1");
        if (channels < 1 || samples < 1 || trials_per_class < 1) throw ContractError("synth: sizes must be positive");
        if (!(sample_rate_hz > 0)) throw ContractError("synth: sample rate must be positive");
        if (signatures.size() != static_cast<std::size_t>(num_classes))
            throw ContractError("synth: need one signature per class");
        if (noise_std < 0) throw ContractError("synth: noise std must be non-negative");
        for (const auto& sig : signatures) {
            if (!(sig.frequency_hz < sample_rate_hz / 2)) throw ContractError("synth: frequency at or above Nyquist");
            for (auto c : sig.channels)
                if (c >= channels) throw ContractError("synth: signature channel out of range");
        }
    }
};

inline Dataset synth_generate(const SynthSpec& spec) {
    spec.validate();
    Dataset ds;
    ds.info = {spec.num_classes, spec.channels, spec.samples, spec.sample_rate_hz};
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int c = 0; c < spec.num_classes; ++c) {
        const auto& sig = spec.signatures[static_cast<std::size_t>(c)];
        std::vector<bool> active(spec.channels, false);
        for (auto ch : sig.channels) active[ch] = true;
        for (std::size_t i = 0; i < spec.trials_per_class; ++i) {
            Trial trial;
            char id[48];
            std::snprintf(id, sizeof(id), "class%d_trial%03zu", c, i);
            trial.id = id;
            trial.label = c;
            trial.channels = spec.channels;
            trial.samples = spec.samples;
            trial.values.resize(spec.channels * spec.samples);
            for (std::size_t ch = 0; ch < spec.channels; ++ch) {
                for (std::size_t t = 0; t < spec.samples; ++t) {
                    double v = 0.0;
                    if (active[ch])
                        v = sig.amplitude *
                            std::sin(2.0 * std::numbers::pi * sig.frequency_hz * static_cast<double>(t) / spec.sample_rate_hz);
                    if (spec.noise_std > 0) v += spec.noise_std * noise(rng);
                    trial.values[ch * spec.samples + t] = static_cast<float>(v);
                }
            }
            ds.trials.push_back(std::move(trial));
        }
    }
    return ds;
}

}  // namespace camlp
