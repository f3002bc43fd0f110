#include "sevo/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sevo {

namespace {
std::atomic<int> g_threads{1};

void check_spmm_dims(const CsrMatrix& w, const DenseMatrix& x) {
    if (x.rows() != w.n_cols)
        throw std::invalid_argument("spmm: inner dimensions disagree");
}

void check_spmm_t_dims(const CsrMatrix& w, const DenseMatrix& d) {
    if (d.rows() != w.n_rows)
        throw std::invalid_argument("spmm_transpose: dimensions disagree");
}
} // namespace

void set_num_threads(int n) { g_threads.store(n < 1 ? 1 : n); }
int num_threads() { return g_threads.load(); }

DenseMatrix spmm(const CsrMatrix& w, const DenseMatrix& x) {
    check_spmm_dims(w, x);
    const index_t B = x.cols();
    DenseMatrix out(w.n_rows, B);
    const index_t* rp = w.row_ptr.data();
    const index_t* ci = w.col_idx.data();
    const real* wv = w.vals.data();
    const real* xd = x.data();
    real* od = out.data();

#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (index_t i = 0; i < w.n_rows; ++i) {
        real* orow = od + i * B;
        for (index_t k = rp[i]; k < rp[i + 1]; ++k) {
            const real v = wv[k];
            const real* xrow = xd + ci[k] * B;
            for (index_t b = 0; b < B; ++b) orow[b] += v * xrow[b];
        }
    }
    return out;
}

DenseMatrix spmm_transpose(const CsrMatrix& w, const DenseMatrix& d) {
    check_spmm_t_dims(w, d);
    const index_t B = d.cols();
    DenseMatrix out(w.n_cols, B);
    const index_t* rp = w.row_ptr.data();
    const index_t* ci = w.col_idx.data();
    const real* wv = w.vals.data();
    const real* dd = d.data();
    real* od = out.data();

    // Every thread walks the whole matrix, so the parallel path only pays off
    // once each thread owns a wide slice of the batch.
    const int nt = num_threads();
    if (nt <= 1 || B < 64 * nt) {
        for (index_t i = 0; i < w.n_rows; ++i) {
            const real* drow = dd + i * B;
            for (index_t k = rp[i]; k < rp[i + 1]; ++k) {
                real* orow = od + ci[k] * B;
                const real v = wv[k];
                for (index_t b = 0; b < B; ++b) orow[b] += v * drow[b];
            }
        }
        return out;
    }

    // Scatter kernel: split the batch across threads so every output element
    // has a single writer and the i-accumulation order matches the serial
    // path. Slice boundaries sit on cache-line multiples.
    const index_t slice = ((B + nt - 1) / nt + 7) & ~index_t(7);
#pragma omp parallel num_threads(nt)
    {
#ifdef _OPENMP
        const int tid = omp_get_thread_num();
#else
        const int tid = 0;
#endif
        const index_t b0 = std::min<index_t>(B, slice * tid);
        const index_t b1 = std::min<index_t>(B, b0 + slice);
        for (index_t i = 0; i < w.n_rows; ++i) {
            const real* drow = dd + i * B;
            for (index_t k = rp[i]; k < rp[i + 1]; ++k) {
                real* orow = od + ci[k] * B;
                const real v = wv[k];
                for (index_t b = b0; b < b1; ++b) orow[b] += v * drow[b];
            }
        }
    }
    return out;
}

std::vector<real> sparse_gradient(std::span<const index_t> rows, std::span<const index_t> cols,
                                  const DenseMatrix& delta, const DenseMatrix& a_prev) {
    if (rows.size() != cols.size())
        throw std::invalid_argument("sparse_gradient: pattern arrays differ in length");
    if (delta.cols() != a_prev.cols())
        throw std::invalid_argument("sparse_gradient: batch sizes disagree");
    const index_t B = delta.cols();
    const real inv_b = B > 0 ? real(1) / static_cast<real>(B) : real(0);
    const index_t n = static_cast<index_t>(rows.size());
    std::vector<real> g(static_cast<std::size_t>(n));
    const real* dd = delta.data();
    const real* ad = a_prev.data();

#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (index_t k = 0; k < n; ++k) {
        const real* drow = dd + rows[static_cast<std::size_t>(k)] * B;
        const real* arow = ad + cols[static_cast<std::size_t>(k)] * B;
        real acc = 0;
        for (index_t b = 0; b < B; ++b) acc += drow[b] * arow[b];
        g[static_cast<std::size_t>(k)] = acc * inv_b;
    }
    return g;
}

std::vector<real> sparse_gradient(const CooMatrix& w_pattern, const DenseMatrix& delta,
                                  const DenseMatrix& a_prev) {
    if (delta.rows() != w_pattern.n_rows || a_prev.rows() != w_pattern.n_cols)
        throw std::invalid_argument("sparse_gradient: shapes disagree with pattern");
    for (std::size_t k = 0; k < w_pattern.rows.size(); ++k) {
        if (w_pattern.rows[k] < 0 || w_pattern.rows[k] >= w_pattern.n_rows ||
            w_pattern.cols[k] < 0 || w_pattern.cols[k] >= w_pattern.n_cols)
            throw std::invalid_argument("sparse_gradient: pattern position out of range");
    }
    return sparse_gradient(std::span<const index_t>(w_pattern.rows),
                           std::span<const index_t>(w_pattern.cols), delta, a_prev);
}

namespace ref {

DenseMatrix spmm(const CsrMatrix& w, const DenseMatrix& x) {
    check_spmm_dims(w, x);
    const index_t B = x.cols();
    DenseMatrix out(w.n_rows, B);
    for (index_t i = 0; i < w.n_rows; ++i) {
        for (index_t k = w.row_ptr[static_cast<std::size_t>(i)];
             k < w.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
            const real v = w.vals[static_cast<std::size_t>(k)];
            const index_t j = w.col_idx[static_cast<std::size_t>(k)];
            for (index_t b = 0; b < B; ++b) out(i, b) += v * x(j, b);
        }
    }
    return out;
}

DenseMatrix spmm_transpose(const CsrMatrix& w, const DenseMatrix& d) {
    check_spmm_t_dims(w, d);
    const index_t B = d.cols();
    DenseMatrix out(w.n_cols, B);
    for (index_t i = 0; i < w.n_rows; ++i) {
        for (index_t k = w.row_ptr[static_cast<std::size_t>(i)];
             k < w.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
            const real v = w.vals[static_cast<std::size_t>(k)];
            const index_t j = w.col_idx[static_cast<std::size_t>(k)];
            for (index_t b = 0; b < B; ++b) out(j, b) += v * d(i, b);
        }
    }
    return out;
}

std::vector<real> sparse_gradient(std::span<const index_t> rows, std::span<const index_t> cols,
                                  const DenseMatrix& delta, const DenseMatrix& a_prev) {
    const index_t B = delta.cols();
    const real inv_b = B > 0 ? real(1) / static_cast<real>(B) : real(0);
    std::vector<real> g(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        real acc = 0;
        for (index_t b = 0; b < B; ++b) acc += delta(rows[k], b) * a_prev(cols[k], b);
        g[k] = acc * inv_b;
    }
    return g;
}

} // namespace ref

} // namespace sevo
