#pragma once

#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "sevo/types.hpp"

namespace sevo {

/// Coordinate-list sparse matrix: parallel (row, col, val) triples.
/// Used for structural passes and gradient accumulation. Invariants:
/// indices in range, no duplicate coordinates, no stored zeros.
struct CooMatrix {
    index_t n_rows = 0;
    index_t n_cols = 0;
    std::vector<index_t> rows;
    std::vector<index_t> cols;
    std::vector<real> vals;

    index_t nnz() const { return static_cast<index_t>(vals.size()); }
};

/// Compressed sparse row matrix, canonical form: row_ptr non-decreasing with
/// row_ptr[0] == 0 and row_ptr[n_rows] == nnz, column indices strictly
/// increasing within each row, no stored zeros. The products in the
/// feed-forward and backpropagation phases run on this format.
struct CsrMatrix {
    index_t n_rows = 0;
    index_t n_cols = 0;
    std::vector<index_t> row_ptr; // length n_rows + 1
    std::vector<index_t> col_idx; // length nnz
    std::vector<real> vals;       // length nnz

    index_t nnz() const { return static_cast<index_t>(vals.size()); }

    bool operator==(const CsrMatrix&) const = default;
};

/// Incremental sparse-matrix builder: per-row ordered (col, val) entries.
/// Inserting a duplicate (row, col) replaces the previous value. Zero-valued
/// insertions are kept as positions and dropped on conversion to CSR.
class SparseBuilder {
public:
    SparseBuilder(index_t n_rows, index_t n_cols);

    index_t n_rows() const { return n_rows_; }
    index_t n_cols() const { return n_cols_; }

    void set(index_t row, index_t col, real val);
    std::optional<real> get(index_t row, index_t col) const;

    /// Count of distinct stored positions (including zero-valued inserts).
    index_t nnz() const { return nnz_; }

    const std::vector<std::pair<index_t, real>>& row_entries(index_t row) const {
        return rows_[static_cast<std::size_t>(row)];
    }

private:
    index_t n_rows_ = 0;
    index_t n_cols_ = 0;
    index_t nnz_ = 0;
    std::vector<std::vector<std::pair<index_t, real>>> rows_;
};

CsrMatrix builder_to_csr(const SparseBuilder& b);

CooMatrix csr_to_coo(const CsrMatrix& m);
/// Rejects duplicate coordinates; output is canonical CSR.
CsrMatrix coo_to_csr(const CooMatrix& m);

index_t nnz(const CsrMatrix& m);
index_t nnz(const CooMatrix& m);
double density(const CsrMatrix& m);
double sparsity(const CsrMatrix& m);

/// Whole-network sparsity: 1 - total_nnz / total_dense_positions.
double sparsity(index_t total_nnz, index_t dense_positions);

/// Throws std::invalid_argument if a CSR invariant is violated.
void validate(const CsrMatrix& m);

/// Debug dump as 3-column CSV: row,col,val.
void write_coo_csv(const CsrMatrix& m, std::ostream& os);

} // namespace sevo
