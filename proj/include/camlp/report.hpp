#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "camlp/errors.hpp"
#include "camlp/train.hpp"

namespace camlp {

/// Fixed-format number so that repeated runs produce byte-identical files.
inline std::string fmt_fixed(double v, int digits = 8) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

/// "xx.xx ± yy.yy" in percent.
inline std::string fmt_percent_pm(const MeanStd& ms) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", 100.0 * ms.mean, 100.0 * ms.std);
    return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw DataError("failed writing " + path.string());
}

inline std::string metrics_csv_header(std::size_t num_classes) {
    std::string h = "fold,level,count,accuracy,macro_f1";
    for (const char* stat : {"precision", "recall", "f1"})
        for (std::size_t c = 0; c < num_classes; ++c) h += "," + std::string(stat) + "_" + std::to_string(c);
    return h + "\n";
}

inline std::string metrics_csv_row(const std::string& fold, const Metrics& m) {
    std::string row = fold + "," + level_name(m.level) + "," + std::to_string(m.count) + "," + fmt_fixed(m.accuracy) +
                      "," + fmt_fixed(m.macro_f1);
    for (const auto* stat : {&m.precision, &m.recall, &m.f1})
        for (double v : *stat) row += "," + fmt_fixed(v);
    return row + "\n";
}

/// Per-fold rows for both levels, then mean and sample-std rows. Per-class
/// columns of the summary rows aggregate the per-fold values the same way.
inline std::string cv_metrics_csv(const CvReport& report, std::size_t num_classes) {
    std::string out = metrics_csv_header(num_classes);
    for (const auto& f : report.folds) {
        out += metrics_csv_row(std::to_string(f.fold), f.slice_metrics);
        out += metrics_csv_row(std::to_string(f.fold), f.trial_metrics);
    }
    for (MetricLevel level : {MetricLevel::slice, MetricLevel::trial}) {
        auto pick = [&](const FoldResult& f) -> const Metrics& {
            return level == MetricLevel::slice ? f.slice_metrics : f.trial_metrics;
        };
        auto column = [&](auto getter) {
            std::vector<double> v;
            for (const auto& f : report.folds) v.push_back(getter(pick(f)));
            return mean_std(v);
        };
        std::vector<MeanStd> cols;
        cols.push_back(column([](const Metrics& m) { return m.accuracy; }));
        cols.push_back(column([](const Metrics& m) { return m.macro_f1; }));
        for (int stat = 0; stat < 3; ++stat) {
            for (std::size_t c = 0; c < num_classes; ++c) {
                cols.push_back(column([&](const Metrics& m) {
                    const auto& v = stat == 0 ? m.precision : stat == 1 ? m.recall : m.f1;
                    return v[c];
                }));
            }
        }
        std::size_t total = 0;
        for (const auto& f : report.folds) total += pick(f).count;
        for (bool is_std : {false, true}) {
            std::string row = std::string(is_std ? "std" : "mean") + "," + level_name(level) + "," + std::to_string(total);
            for (const auto& ms : cols) row += "," + fmt_fixed(is_std ? ms.std : ms.mean);
            out += row + "\n";
        }
    }
    return out;
}

inline std::string single_metrics_csv(const std::vector<Metrics>& metrics, std::size_t num_classes) {
    std::string out = metrics_csv_header(num_classes);
    for (const auto& m : metrics) out += metrics_csv_row("all", m);
    return out;
}

inline std::string loss_csv(const std::vector<double>& curve) {
    std::string out = "epoch,loss\n";
    for (std::size_t e = 0; e < curve.size(); ++e) out += std::to_string(e + 1) + "," + fmt_fixed(curve[e], 10) + "\n";
    return out;
}

inline std::string fold_plan_csv(const FoldPlan& plan, const Dataset& dataset) {
    std::string out = "trial_id,label,fold\n";
    for (const auto& t : dataset.trials)
        out += t.id + "," + std::to_string(t.label) + "," + std::to_string(plan.fold_of(t.id)) + "\n";
    return out;
}

inline std::string cv_table(const CvReport& report) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof(line), "%-6s %12s %12s %12s %12s\n", "fold", "slice acc%", "slice F1%", "trial acc%",
                  "trial F1%");
    os << line;
    for (const auto& f : report.folds) {
        std::snprintf(line, sizeof(line), "%-6zu %12.2f %12.2f %12.2f %12.2f\n", f.fold,
                      100.0 * f.slice_metrics.accuracy, 100.0 * f.slice_metrics.macro_f1,
                      100.0 * f.trial_metrics.accuracy, 100.0 * f.trial_metrics.macro_f1);
        os << line;
    }
    os << "\n";
    os << "trial-level accuracy (%): " << fmt_percent_pm(report.summary.trial_accuracy) << "\n";
    os << "trial-level macro-F1 (%): " << fmt_percent_pm(report.summary.trial_macro_f1) << "\n";
    os << "slice-level accuracy (%): " << fmt_percent_pm(report.summary.slice_accuracy) << "\n";
    os << "slice-level macro-F1 (%): " << fmt_percent_pm(report.summary.slice_macro_f1) << "\n";
    os << "(mean ± sample std over " << report.folds.size() << " folds)\n";
    return os.str();
}

inline std::string metrics_table(const Metrics& m) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof(line), "%s level: n=%zu accuracy %.2f%%  macro-F1 %.2f%%\n", level_name(m.level), m.count,
                  100.0 * m.accuracy, 100.0 * m.macro_f1);
    os << line;
    for (std::size_t c = 0; c < m.f1.size(); ++c) {
        std::snprintf(line, sizeof(line), "  class %zu: precision %.4f recall %.4f f1 %.4f support %zu\n", c,
                      m.precision[c], m.recall[c], m.f1[c], m.support[c]);
        os << line;
    }
    return os.str();
}

struct SweepRow {
    std::size_t blocks = 0;
    CvSummary summary;
};

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out =
        "blocks,trial_accuracy_mean,trial_accuracy_std,trial_macro_f1_mean,trial_macro_f1_std,"
        "slice_accuracy_mean,slice_accuracy_std,slice_macro_f1_mean,slice_macro_f1_std\n";
    for (const auto& r : rows) {
        const auto& s = r.summary;
        out += std::to_string(r.blocks);
        for (const auto* ms : {&s.trial_accuracy, &s.trial_macro_f1, &s.slice_accuracy, &s.slice_macro_f1})
            out += "," + fmt_fixed(ms->mean) + "," + fmt_fixed(ms->std);
        out += "\n";
    }
    return out;
}

// Left-justifies to a width in code points, so "±" counts as one column.
inline std::string pad_right(const std::string& s, std::size_t width) {
    std::size_t columns = 0;
    for (unsigned char ch : s) columns += (ch & 0xC0) != 0x80;
    return columns >= width ? s : s + std::string(width - columns, ' ');
}

inline std::string sweep_table(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << pad_right("N", 4) << pad_right("trial acc (%)", 21) << "trial macro-F1 (%)\n";
    for (const auto& r : rows) {
        os << pad_right(std::to_string(r.blocks), 4) << pad_right(fmt_percent_pm(r.summary.trial_accuracy), 21)
           << fmt_percent_pm(r.summary.trial_macro_f1) << "\n";
    }
    return os.str();
}

inline std::string gradcheck_csv(const GradCheckReport& report) {
    std::string out = "group,size,max_rel_error,passed\n";
    char err[32];
    for (const auto& g : report.groups) {
        std::snprintf(err, sizeof(err), "%.6e", g.max_rel_error);
        out += g.name + "," + std::to_string(g.size) + "," + err + "," + (g.passed ? "1" : "0") + "\n";
    }
    return out;
}

inline std::string gradcheck_table(const GradCheckReport& report) {
    std::ostringstream os;
    char line[200];
    for (const auto& g : report.groups) {
        std::snprintf(line, sizeof(line), "%-4s %-40s %6zu  max rel err %.3e\n", g.passed ? "PASS" : "FAIL",
                      g.name.c_str(), g.size, g.max_rel_error);
        os << line;
    }
    std::snprintf(line, sizeof(line), "%s: %zu groups, tolerance %.1e\n", report.passed() ? "gradcheck passed" : "gradcheck FAILED",
                  report.groups.size(), report.tolerance);
    os << line;
    return os.str();
}

}  // namespace camlp
