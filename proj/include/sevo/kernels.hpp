#pragma once

#include <span>

#include "sevo/dense.hpp"
#include "sevo/sparse.hpp"

namespace sevo {

/// Number of threads the OpenMP kernels use. Defaults to 1: the headline
/// training numbers are single-thread, and results are bit-identical at any
/// thread count (each output element is owned by exactly one thread).
void set_num_threads(int n);
int num_threads();

/// out[i,b] = sum_j w[i,j] * x[j,b].  x is (n_cols, B), out is (n_rows, B).
DenseMatrix spmm(const CsrMatrix& w, const DenseMatrix& x);

/// out[j,b] = sum_i w[i,j] * d[i,b] — the product with w transposed, without
/// materializing the transpose. d is (n_rows, B), out is (n_cols, B).
DenseMatrix spmm_transpose(const CsrMatrix& w, const DenseMatrix& d);

/// Per-connection batch gradient: g[k] = (1/B) * sum_b delta[rows[k],b] * a_prev[cols[k],b].
/// Never forms the dense outer product; memory stays O(nnz + inputs).
std::vector<real> sparse_gradient(const CooMatrix& w_pattern, const DenseMatrix& delta,
                                  const DenseMatrix& a_prev);

/// Same kernel over a bare (rows, cols) pattern, for callers that keep the
/// pattern split out (the training loop caches it between evolutions).
std::vector<real> sparse_gradient(std::span<const index_t> rows, std::span<const index_t> cols,
                                  const DenseMatrix& delta, const DenseMatrix& a_prev);

// Serial reference kernels. Same loop nests without the OpenMP pragmas; the
// parallel versions must match them bit-for-bit at any thread count.
namespace ref {
DenseMatrix spmm(const CsrMatrix& w, const DenseMatrix& x);
DenseMatrix spmm_transpose(const CsrMatrix& w, const DenseMatrix& d);
std::vector<real> sparse_gradient(std::span<const index_t> rows, std::span<const index_t> cols,
                                  const DenseMatrix& delta, const DenseMatrix& a_prev);
} // namespace ref

} // namespace sevo
