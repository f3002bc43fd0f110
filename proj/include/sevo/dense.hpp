#pragma once

#include <cassert>
#include <span>
#include <vector>

#include "sevo/types.hpp"

namespace sevo {

/// Row-major dense matrix. Activations and minibatches use the convention
/// (units, batch): one row per unit, the batch is the trailing dimension.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(index_t rows, index_t cols)
        : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows * cols), real(0)) {}

    index_t rows() const { return rows_; }
    index_t cols() const { return cols_; }

    real& operator()(index_t i, index_t j) {
        assert(i >= 0 && i < rows_ && j >= 0 && j < cols_);
        return data_[static_cast<std::size_t>(i * cols_ + j)];
    }
    real operator()(index_t i, index_t j) const {
        assert(i >= 0 && i < rows_ && j >= 0 && j < cols_);
        return data_[static_cast<std::size_t>(i * cols_ + j)];
    }

    real* data() { return data_.data(); }
    const real* data() const { return data_.data(); }
    std::size_t size() const { return data_.size(); }

    std::span<real> row(index_t i) {
        return {data_.data() + i * cols_, static_cast<std::size_t>(cols_)};
    }
    std::span<const real> row(index_t i) const {
        return {data_.data() + i * cols_, static_cast<std::size_t>(cols_)};
    }

    void fill(real v) { data_.assign(data_.size(), v); }

    bool operator==(const DenseMatrix&) const = default;

private:
    index_t rows_ = 0;
    index_t cols_ = 0;
    std::vector<real> data_;
};

} // namespace sevo
