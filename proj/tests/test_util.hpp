#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "camlp/tensor.hpp"

namespace camlp::testing {

using TensorD = Tensor<double>;

inline TensorD random_tensor(const Shape& shape, std::mt19937_64& rng, bool requires_grad = true, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = normal(rng);
    return TensorD(shape, values, requires_grad);
}

/// sum(out * weights): a scalar whose gradient w.r.t. `out` is `weights`, so
/// every output element is probed with a different sensitivity.
inline TensorD probe(const TensorD& out, std::mt19937_64& rng) {
    auto weights = random_tensor(out.shape(), rng, false);
    return sum(mul(out, weights));
}

struct FdResult {
    double rel_error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
    double analytic_norm = 0.0;
};

/// Central differences of `loss` w.r.t. every element of every input.
/// `loss` must rebuild the graph from the current input values on each call.
inline FdResult finite_difference_check(std::vector<TensorD>& inputs, const std::function<TensorD()>& loss,
                                        double h = 1e-5) {
    for (auto& in : inputs) in.zero_grad();
    loss().backward();
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (auto& in : inputs) {
        const std::vector<double> analytic(in.grad().begin(), in.grad().end());
        auto values = in.mutable_data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + h;
            const double up = loss().item();
            values[i] = saved - h;
            const double down = loss().item();
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
            a2 += analytic[i] * analytic[i];
            n2 += numeric * numeric;
        }
    }
    FdResult r;
    r.analytic_norm = std::sqrt(a2);
    const double denom = std::max(std::sqrt(a2), std::sqrt(n2));
    r.rel_error = denom > 0.0 ? std::sqrt(diff2) / denom : std::sqrt(diff2);
    return r;
}

class TempDir {
   public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("camlp_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

   private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace camlp::testing
