#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sevo/dense.hpp"
#include "sevo/sparse.hpp"

namespace test_helpers {

struct TempFileGuard {
    std::string path;
    explicit TempFileGuard(const std::string& name) {
        path = (std::filesystem::temp_directory_path() /
                (std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()) +
                 "_" + name))
                   .string();
    }
    ~TempFileGuard() {
        std::error_code ec;
        std::filesystem::remove(path, ec);
    }
};

using sevo::CsrMatrix;
using sevo::DenseMatrix;
using sevo::index_t;
using sevo::real;

inline std::vector<std::vector<double>> densify(const CsrMatrix& m) {
    std::vector<std::vector<double>> d(static_cast<std::size_t>(m.n_rows),
                                       std::vector<double>(static_cast<std::size_t>(m.n_cols), 0));
    for (index_t i = 0; i < m.n_rows; ++i)
        for (index_t k = m.row_ptr[static_cast<std::size_t>(i)];
             k < m.row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
            d[static_cast<std::size_t>(i)][static_cast<std::size_t>(m.col_idx[static_cast<std::size_t>(k)])] =
                static_cast<double>(m.vals[static_cast<std::size_t>(k)]);
    return d;
}

// Plain triple-loop oracle product: (dense w) * x.
inline DenseMatrix dense_matmul(const std::vector<std::vector<double>>& w, const DenseMatrix& x) {
    DenseMatrix out(static_cast<index_t>(w.size()), x.cols());
    for (std::size_t i = 0; i < w.size(); ++i)
        for (index_t b = 0; b < x.cols(); ++b) {
            double acc = 0;
            for (std::size_t j = 0; j < w[i].size(); ++j)
                acc += w[i][j] * static_cast<double>(x(static_cast<index_t>(j), b));
            out(static_cast<index_t>(i), b) = static_cast<real>(acc);
        }
    return out;
}

inline std::vector<std::vector<double>> transpose(const std::vector<std::vector<double>>& w) {
    if (w.empty()) return {};
    std::vector<std::vector<double>> t(w[0].size(), std::vector<double>(w.size(), 0));
    for (std::size_t i = 0; i < w.size(); ++i)
        for (std::size_t j = 0; j < w[i].size(); ++j) t[j][i] = w[i][j];
    return t;
}

inline CsrMatrix random_csr(index_t rows, index_t cols, double density, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> val(0.0, 1.0);
    sevo::SparseBuilder b(rows, cols);
    for (index_t i = 0; i < rows; ++i)
        for (index_t j = 0; j < cols; ++j)
            if (u(rng) < density) {
                double v = val(rng);
                while (v == 0.0) v = val(rng);
                b.set(i, j, static_cast<real>(v));
            }
    return sevo::builder_to_csr(b);
}

inline DenseMatrix random_dense(index_t rows, index_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> val(0.0, 1.0);
    DenseMatrix m(rows, cols);
    for (std::size_t k = 0; k < m.size(); ++k) m.data()[k] = static_cast<real>(val(rng));
    return m;
}

inline double max_rel_diff(const DenseMatrix& a, const DenseMatrix& b) {
    double worst = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double x = static_cast<double>(a.data()[k]);
        const double y = static_cast<double>(b.data()[k]);
        const double scale = std::max({1.0, std::fabs(x), std::fabs(y)});
        worst = std::max(worst, std::fabs(x - y) / scale);
    }
    return worst;
}

inline std::set<std::pair<index_t, index_t>> position_set(const CsrMatrix& m) {
    std::set<std::pair<index_t, index_t>> s;
    for (index_t i = 0; i < m.n_rows; ++i)
        for (index_t k = m.row_ptr[static_cast<std::size_t>(i)];
             k < m.row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
            s.insert({i, m.col_idx[static_cast<std::size_t>(k)]});
    return s;
}

} // namespace test_helpers
