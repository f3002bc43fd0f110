#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sevo/types.hpp"

namespace sevo {

/// c x c count matrix, counts(i, j) = samples predicted class i whose true
/// class is j: rows are predicted classes, columns are true classes.
/// Recall/precision on an empty class are undefined, not zero — tiny
/// unbalanced test sets make that case reachable.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int n_classes);

    int n_classes() const { return c_; }
    std::int64_t count(int predicted, int actual) const;
    std::int64_t total() const;

    void accumulate(int predicted, int actual);

    /// M_ii / column sum (fraction of true-class-i samples classified i).
    std::optional<double> recall(int i) const;
    /// M_ii / row sum (fraction of predicted-i samples that are truly i).
    std::optional<double> precision(int i) const;
    /// trace / total.
    std::optional<double> accuracy() const;
    /// Two-class only: tn / (tn + fp) with `positive` naming the positive class.
    std::optional<double> specificity(int positive = 1) const;

    /// Combine scoring shards (same class count).
    static ConfusionMatrix merge(const ConfusionMatrix& a, const ConfusionMatrix& b);

    /// Text table: per-cell counts with percentages of the total, a bottom
    /// row with the per-column correct fraction and a right column with the
    /// per-row correct fraction, all to one decimal place.
    std::string render(const std::vector<std::string>& class_names = {}) const;

    /// CSV: header of true-class labels, one row per predicted class, then a
    /// trailing recall row; last field of each data row is the precision.
    void write_csv(std::ostream& os, const std::vector<std::string>& class_names = {}) const;

private:
    int c_ = 0;
    std::vector<std::int64_t> counts_; // row-major c x c
};

/// Re-parse the CSV produced by write_csv (counts block only).
ConfusionMatrix read_confusion_csv(std::istream& is);

} // namespace sevo
