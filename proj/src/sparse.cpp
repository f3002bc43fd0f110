#include "sevo/sparse.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>
#include <stdexcept>
#include <string>

namespace sevo {

SparseBuilder::SparseBuilder(index_t n_rows, index_t n_cols)
    : n_rows_(n_rows), n_cols_(n_cols), rows_(static_cast<std::size_t>(n_rows)) {
    if (n_rows < 0 || n_cols < 0)
        throw std::invalid_argument("SparseBuilder: negative dimension");
}

void SparseBuilder::set(index_t row, index_t col, real val) {
    if (row < 0 || row >= n_rows_ || col < 0 || col >= n_cols_)
        throw std::out_of_range("SparseBuilder::set: position out of range");
    auto& entries = rows_[static_cast<std::size_t>(row)];
    auto it = std::lower_bound(entries.begin(), entries.end(), col,
                               [](const auto& e, index_t c) { return e.first < c; });
    if (it != entries.end() && it->first == col) {
        it->second = val;
    } else {
        entries.insert(it, {col, val});
        ++nnz_;
    }
}

std::optional<real> SparseBuilder::get(index_t row, index_t col) const {
    if (row < 0 || row >= n_rows_ || col < 0 || col >= n_cols_) return std::nullopt;
    const auto& entries = rows_[static_cast<std::size_t>(row)];
    auto it = std::lower_bound(entries.begin(), entries.end(), col,
                               [](const auto& e, index_t c) { return e.first < c; });
    if (it != entries.end() && it->first == col) return it->second;
    return std::nullopt;
}

CsrMatrix builder_to_csr(const SparseBuilder& b) {
    CsrMatrix m;
    m.n_rows = b.n_rows();
    m.n_cols = b.n_cols();
    m.row_ptr.resize(static_cast<std::size_t>(m.n_rows) + 1, 0);
    m.col_idx.reserve(static_cast<std::size_t>(b.nnz()));
    m.vals.reserve(static_cast<std::size_t>(b.nnz()));
    for (index_t i = 0; i < m.n_rows; ++i) {
        for (const auto& [col, val] : b.row_entries(i)) {
            if (val == real(0)) continue;
            m.col_idx.push_back(col);
            m.vals.push_back(val);
        }
        m.row_ptr[static_cast<std::size_t>(i) + 1] = static_cast<index_t>(m.col_idx.size());
    }
    return m;
}

CooMatrix csr_to_coo(const CsrMatrix& m) {
    CooMatrix c;
    c.n_rows = m.n_rows;
    c.n_cols = m.n_cols;
    const std::size_t n = m.vals.size();
    c.rows.resize(n);
    c.cols = m.col_idx;
    c.vals = m.vals;
    for (index_t i = 0; i < m.n_rows; ++i) {
        for (index_t k = m.row_ptr[static_cast<std::size_t>(i)];
             k < m.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
            c.rows[static_cast<std::size_t>(k)] = i;
        }
    }
    return c;
}

CsrMatrix coo_to_csr(const CooMatrix& m) {
    const std::size_t n = m.vals.size();
    if (m.rows.size() != n || m.cols.size() != n)
        throw std::invalid_argument("coo_to_csr: triple arrays differ in length");

    std::vector<std::size_t> order(n);
    for (std::size_t k = 0; k < n; ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (m.rows[a] != m.rows[b]) return m.rows[a] < m.rows[b];
        return m.cols[a] < m.cols[b];
    });

    CsrMatrix out;
    out.n_rows = m.n_rows;
    out.n_cols = m.n_cols;
    out.row_ptr.assign(static_cast<std::size_t>(m.n_rows) + 1, 0);
    out.col_idx.resize(n);
    out.vals.resize(n);

    index_t prev_row = -1, prev_col = -1;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t src = order[k];
        const index_t r = m.rows[src];
        const index_t c = m.cols[src];
        if (r < 0 || r >= m.n_rows || c < 0 || c >= m.n_cols)
            throw std::invalid_argument("coo_to_csr: index out of range");
        if (r == prev_row && c == prev_col)
            throw std::invalid_argument("coo_to_csr: duplicate coordinate (" +
                                        std::to_string(r) + "," + std::to_string(c) + ")");
        if (m.vals[src] == real(0))
            throw std::invalid_argument("coo_to_csr: explicit zero value stored");
        prev_row = r;
        prev_col = c;
        out.col_idx[k] = c;
        out.vals[k] = m.vals[src];
        ++out.row_ptr[static_cast<std::size_t>(r) + 1];
    }
    for (std::size_t i = 1; i < out.row_ptr.size(); ++i) out.row_ptr[i] += out.row_ptr[i - 1];
    return out;
}

index_t nnz(const CsrMatrix& m) { return m.nnz(); }
index_t nnz(const CooMatrix& m) { return m.nnz(); }

double density(const CsrMatrix& m) {
    const index_t total = m.n_rows * m.n_cols;
    if (total == 0) return 0.0;
    return static_cast<double>(m.nnz()) / static_cast<double>(total);
}

double sparsity(const CsrMatrix& m) { return 1.0 - density(m); }

double sparsity(index_t total_nnz, index_t dense_positions) {
    if (dense_positions == 0) return 0.0;
    return 1.0 - static_cast<double>(total_nnz) / static_cast<double>(dense_positions);
}

void validate(const CsrMatrix& m) {
    if (m.n_rows < 0 || m.n_cols < 0)
        throw std::invalid_argument("csr: negative dimension");
    if (m.row_ptr.size() != static_cast<std::size_t>(m.n_rows) + 1)
        throw std::invalid_argument("csr: row_ptr length != n_rows + 1");
    if (m.row_ptr.front() != 0)
        throw std::invalid_argument("csr: row_ptr[0] != 0");
    if (m.row_ptr.back() != m.nnz())
        throw std::invalid_argument("csr: row_ptr[n_rows] != nnz");
    if (m.col_idx.size() != m.vals.size())
        throw std::invalid_argument("csr: col_idx/vals length mismatch");
    for (index_t i = 0; i < m.n_rows; ++i) {
        const index_t lo = m.row_ptr[static_cast<std::size_t>(i)];
        const index_t hi = m.row_ptr[static_cast<std::size_t>(i) + 1];
        if (lo > hi) throw std::invalid_argument("csr: row_ptr decreasing");
        for (index_t k = lo; k < hi; ++k) {
            const index_t c = m.col_idx[static_cast<std::size_t>(k)];
            if (c < 0 || c >= m.n_cols)
                throw std::invalid_argument("csr: column index out of range");
            if (k > lo && m.col_idx[static_cast<std::size_t>(k) - 1] >= c)
                throw std::invalid_argument("csr: columns not strictly increasing in row");
            if (m.vals[static_cast<std::size_t>(k)] == real(0))
                throw std::invalid_argument("csr: stored zero value");
        }
    }
}

void write_coo_csv(const CsrMatrix& m, std::ostream& os) {
    os << "row,col,val\n";
    char buf[64];
    for (index_t i = 0; i < m.n_rows; ++i) {
        for (index_t k = m.row_ptr[static_cast<std::size_t>(i)];
             k < m.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
            const auto v = m.vals[static_cast<std::size_t>(k)];
            auto res = std::to_chars(buf, buf + sizeof(buf), v);
            os << i << ',' << m.col_idx[static_cast<std::size_t>(k)] << ','
               << std::string_view(buf, res.ptr) << '\n';
        }
    }
}

} // namespace sevo
