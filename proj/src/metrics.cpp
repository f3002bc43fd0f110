#include "sevo/metrics.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace sevo {

namespace {

std::string pct(std::optional<double> v) {
    if (!v) return "na";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f%%", *v * 100.0);
    return buf;
}

std::string default_name(int i) { return "class_" + std::to_string(i); }

} // namespace

ConfusionMatrix::ConfusionMatrix(int n_classes) : c_(n_classes) {
    if (n_classes < 1) throw std::invalid_argument("ConfusionMatrix: need >= 1 class");
    counts_.assign(static_cast<std::size_t>(c_) * static_cast<std::size_t>(c_), 0);
}

std::int64_t ConfusionMatrix::count(int predicted, int actual) const {
    if (predicted < 0 || predicted >= c_ || actual < 0 || actual >= c_)
        throw std::out_of_range("ConfusionMatrix::count: class out of range");
    return counts_[static_cast<std::size_t>(predicted) * c_ + actual];
}

std::int64_t ConfusionMatrix::total() const {
    std::int64_t t = 0;
    for (auto v : counts_) t += v;
    return t;
}

void ConfusionMatrix::accumulate(int predicted, int actual) {
    if (predicted < 0 || predicted >= c_ || actual < 0 || actual >= c_)
        throw std::out_of_range("ConfusionMatrix::accumulate: class out of range");
    ++counts_[static_cast<std::size_t>(predicted) * c_ + actual];
}

std::optional<double> ConfusionMatrix::recall(int i) const {
    std::int64_t col = 0;
    for (int p = 0; p < c_; ++p) col += count(p, i);
    if (col == 0) return std::nullopt;
    return static_cast<double>(count(i, i)) / static_cast<double>(col);
}

std::optional<double> ConfusionMatrix::precision(int i) const {
    std::int64_t row = 0;
    for (int a = 0; a < c_; ++a) row += count(i, a);
    if (row == 0) return std::nullopt;
    return static_cast<double>(count(i, i)) / static_cast<double>(row);
}

std::optional<double> ConfusionMatrix::accuracy() const {
    const std::int64_t t = total();
    if (t == 0) return std::nullopt;
    std::int64_t diag = 0;
    for (int i = 0; i < c_; ++i) diag += count(i, i);
    return static_cast<double>(diag) / static_cast<double>(t);
}

std::optional<double> ConfusionMatrix::specificity(int positive) const {
    if (c_ != 2) throw std::logic_error("specificity is defined for 2-class matrices");
    const int negative = 1 - positive;
    const std::int64_t tn = count(negative, negative);
    const std::int64_t fp = count(positive, negative);
    if (tn + fp == 0) return std::nullopt;
    return static_cast<double>(tn) / static_cast<double>(tn + fp);
}

ConfusionMatrix ConfusionMatrix::merge(const ConfusionMatrix& a, const ConfusionMatrix& b) {
    if (a.c_ != b.c_) throw std::invalid_argument("ConfusionMatrix::merge: class counts differ");
    ConfusionMatrix out(a.c_);
    for (std::size_t k = 0; k < out.counts_.size(); ++k)
        out.counts_[k] = a.counts_[k] + b.counts_[k];
    return out;
}

std::string ConfusionMatrix::render(const std::vector<std::string>& class_names) const {
    auto name = [&](int i) {
        return i < static_cast<int>(class_names.size()) ? class_names[static_cast<std::size_t>(i)]
                                                        : default_name(i);
    };
    const std::int64_t t = total();
    std::ostringstream os;
    os << "pred\\true";
    for (int j = 0; j < c_; ++j) os << '\t' << name(j);
    os << "\tprecision\n";
    for (int i = 0; i < c_; ++i) {
        os << name(i);
        for (int j = 0; j < c_; ++j) {
            const auto n = count(i, j);
            const double share = t > 0 ? static_cast<double>(n) / static_cast<double>(t) : 0.0;
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%lld (%.1f%%)", static_cast<long long>(n),
                          share * 100.0);
            os << '\t' << buf;
        }
        os << '\t' << pct(precision(i)) << '\n';
    }
    os << "recall";
    for (int j = 0; j < c_; ++j) os << '\t' << pct(recall(j));
    os << '\t' << pct(accuracy()) << '\n';
    return os.str();
}

void ConfusionMatrix::write_csv(std::ostream& os,
                                const std::vector<std::string>& class_names) const {
    auto name = [&](int i) {
        return i < static_cast<int>(class_names.size()) ? class_names[static_cast<std::size_t>(i)]
                                                        : default_name(i);
    };
    os << "pred\\true";
    for (int j = 0; j < c_; ++j) os << ',' << name(j);
    os << ",precision_pct\n";
    for (int i = 0; i < c_; ++i) {
        os << name(i);
        for (int j = 0; j < c_; ++j) os << ',' << count(i, j);
        const auto p = precision(i);
        os << ',' << (p ? pct(p).substr(0, pct(p).size() - 1) : "na") << '\n';
    }
    os << "recall_pct";
    for (int j = 0; j < c_; ++j) {
        const auto r = recall(j);
        os << ',' << (r ? pct(r).substr(0, pct(r).size() - 1) : "na");
    }
    const auto acc = accuracy();
    os << ',' << (acc ? pct(acc).substr(0, pct(acc).size() - 1) : "na") << '\n';
}

ConfusionMatrix read_confusion_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("confusion csv: empty input");
    int c = -1; // count commas in header: c class columns + precision column
    for (char ch : line)
        if (ch == ',') ++c;
    if (c < 1) throw std::runtime_error("confusion csv: malformed header");

    ConfusionMatrix cm(c);
    for (int i = 0; i < c; ++i) {
        if (!std::getline(is, line)) throw std::runtime_error("confusion csv: truncated");
        std::stringstream row(line);
        std::string cell;
        std::getline(row, cell, ','); // predicted-class label
        for (int j = 0; j < c; ++j) {
            if (!std::getline(row, cell, ','))
                throw std::runtime_error("confusion csv: short row");
            const long long n = std::stoll(cell);
            for (long long k = 0; k < n; ++k) cm.accumulate(i, j);
        }
    }
    return cm;
}

} // namespace sevo
