#include "sevo/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

namespace sevo {

namespace {

constexpr char kMagic[4] = {'S', 'E', 'V', 'D'};
constexpr std::uint32_t kVersion = 1;

void write_raw(std::ofstream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_raw(std::ifstream& is, void* p, std::size_t n, const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw std::runtime_error(std::string("dataset file truncated while reading ") + what);
}

std::string format_real(real v) {
    char buf[48];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return {buf, res.ptr};
}

int infer_classes(const std::vector<std::int32_t>& labels) {
    int c = 0;
    for (auto l : labels) c = std::max(c, static_cast<int>(l) + 1);
    return c;
}

} // namespace

void Dataset::validate() const {
    if (static_cast<index_t>(features.size()) != n_samples * n_features)
        throw std::invalid_argument("Dataset: feature buffer size mismatch");
    if (static_cast<index_t>(labels.size()) != n_samples)
        throw std::invalid_argument("Dataset: label count mismatch");
    for (auto l : labels)
        if (l < 0 || l >= n_classes) throw std::invalid_argument("Dataset: label out of range");
    for (auto v : features)
        if (!std::isfinite(static_cast<double>(v)))
            throw std::invalid_argument("Dataset: non-finite feature value");
}

CsvParseError::CsvParseError(const std::string& msg, index_t row_, index_t col_)
    : std::runtime_error(msg + " (row " + std::to_string(row_) +
                         (col_ > 0 ? ", column " + std::to_string(col_) : "") + ")"),
      row(row_), col(col_) {}

Dataset load_csv(const std::string& path, index_t label_column, bool has_header) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_csv: cannot open " + path);

    std::string line;
    index_t line_no = 0;
    if (has_header) {
        if (!std::getline(is, line)) throw CsvParseError("load_csv: empty file", 1, 0);
        ++line_no;
    }

    Dataset ds;
    std::map<std::string, std::int32_t> label_ids;
    std::vector<std::string> cells;
    index_t n_cols = -1;

    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() && is.eof()) break;
        cells.clear();
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma == std::string::npos ? comma : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (n_cols < 0) {
            n_cols = static_cast<index_t>(cells.size());
            if (n_cols < 2) throw CsvParseError("load_csv: need at least 2 columns", line_no, 0);
        } else if (static_cast<index_t>(cells.size()) != n_cols) {
            throw CsvParseError("load_csv: ragged row, expected " + std::to_string(n_cols) +
                                    " cells, got " + std::to_string(cells.size()),
                                line_no, 0);
        }
        const index_t label_idx = label_column < 0 ? n_cols - 1 : label_column;
        if (label_idx >= n_cols)
            throw CsvParseError("load_csv: label column out of range", line_no, label_idx + 1);

        for (index_t c = 0; c < n_cols; ++c) {
            const std::string& cell = cells[static_cast<std::size_t>(c)];
            if (c == label_idx) {
                auto [it, inserted] =
                    label_ids.try_emplace(cell, static_cast<std::int32_t>(ds.class_names.size()));
                if (inserted) ds.class_names.push_back(cell);
                ds.labels.push_back(it->second);
            } else {
                double v = 0;
                const char* first = cell.data();
                const char* last = cell.data() + cell.size();
                auto [p, ec] = std::from_chars(first, last, v);
                if (ec != std::errc() || p != last)
                    throw CsvParseError("load_csv: non-numeric feature cell '" + cell + "'",
                                        line_no, c + 1);
                ds.features.push_back(static_cast<real>(v));
            }
        }
        ++ds.n_samples;
    }
    if (ds.n_samples == 0) throw CsvParseError("load_csv: no data rows", line_no, 0);
    ds.n_features = n_cols - 1;
    ds.n_classes = static_cast<int>(ds.class_names.size());
    ds.validate();
    return ds;
}

Dataset load_csv_by_label_name(const std::string& path, const std::string& label_name) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_csv: cannot open " + path);
    std::string header;
    if (!std::getline(is, header)) throw CsvParseError("load_csv: empty file", 1, 0);
    index_t col = 0;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = header.find(',', start);
        const std::string name =
            header.substr(start, comma == std::string::npos ? comma : comma - start);
        if (name == label_name) return load_csv(path, col, true);
        if (comma == std::string::npos) break;
        start = comma + 1;
        ++col;
    }
    throw CsvParseError("load_csv: no header column named '" + label_name + "'", 1, 0);
}

std::vector<std::vector<std::string>> read_csv_table(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("read_csv_table: cannot open " + path);
    std::vector<std::vector<std::string>> table;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() && is.eof()) break;
        std::vector<std::string> row;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            row.push_back(line.substr(start, comma == std::string::npos ? comma : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        table.push_back(std::move(row));
    }
    return table;
}

void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_csv: cannot open " + path);
    for (index_t f = 0; f < ds.n_features; ++f) os << "f" << f << ',';
    os << "label\n";
    for (index_t i = 0; i < ds.n_samples; ++i) {
        for (index_t f = 0; f < ds.n_features; ++f) os << format_real(ds.feature(i, f)) << ',';
        const auto l = ds.labels[static_cast<std::size_t>(i)];
        if (l < static_cast<std::int32_t>(ds.class_names.size()))
            os << ds.class_names[static_cast<std::size_t>(l)];
        else
            os << l;
        os << '\n';
    }
}

void save_binary(const Dataset& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_binary: cannot open " + path);
    write_raw(os, kMagic, 4);
    write_raw(os, &kVersion, sizeof(kVersion));
    const std::uint8_t dtype = sizeof(real);
    write_raw(os, &dtype, 1);
    const std::uint64_t ns = static_cast<std::uint64_t>(ds.n_samples);
    const std::uint64_t nf = static_cast<std::uint64_t>(ds.n_features);
    const std::uint32_t nc = static_cast<std::uint32_t>(ds.n_classes);
    write_raw(os, &ns, sizeof(ns));
    write_raw(os, &nf, sizeof(nf));
    write_raw(os, &nc, sizeof(nc));
    write_raw(os, ds.features.data(), ds.features.size() * sizeof(real));
    write_raw(os, ds.labels.data(), ds.labels.size() * sizeof(std::int32_t));
    if (!os) throw std::runtime_error("save_binary: write failed for " + path);
}

Dataset load_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_binary: cannot open " + path);
    char magic[4];
    read_raw(is, magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("load_binary: bad magic, not a dataset file");
    std::uint32_t version = 0;
    read_raw(is, &version, sizeof(version), "version");
    if (version != kVersion)
        throw std::runtime_error("load_binary: unsupported version " + std::to_string(version));
    std::uint8_t dtype = 0;
    read_raw(is, &dtype, 1, "dtype");
    if (dtype != sizeof(real))
        throw std::runtime_error("load_binary: dtype width " + std::to_string(dtype) +
                                 " does not match this build (" + std::to_string(sizeof(real)) +
                                 ")");
    std::uint64_t ns = 0, nf = 0;
    std::uint32_t nc = 0;
    read_raw(is, &ns, sizeof(ns), "dims");
    read_raw(is, &nf, sizeof(nf), "dims");
    read_raw(is, &nc, sizeof(nc), "dims");
    Dataset ds;
    ds.n_samples = static_cast<index_t>(ns);
    ds.n_features = static_cast<index_t>(nf);
    ds.n_classes = static_cast<int>(nc);
    ds.features.resize(ns * nf);
    ds.labels.resize(ns);
    if (!ds.features.empty())
        read_raw(is, ds.features.data(), ds.features.size() * sizeof(real), "features");
    if (!ds.labels.empty())
        read_raw(is, ds.labels.data(), ds.labels.size() * sizeof(std::int32_t), "labels");
    ds.validate();
    return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw std::invalid_argument("split: train_fraction must be in (0, 1)");
    ds.validate();

    std::mt19937_64 rng(spec.seed);
    std::vector<index_t> train_idx, test_idx;
    const auto target_train = static_cast<index_t>(
        std::llround(spec.train_fraction * static_cast<double>(ds.n_samples)));

    if (spec.stratified) {
        std::vector<std::vector<index_t>> by_class(static_cast<std::size_t>(ds.n_classes));
        for (index_t i = 0; i < ds.n_samples; ++i)
            by_class[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])].push_back(i);
        for (int c = 0; c < ds.n_classes; ++c)
            if (by_class[static_cast<std::size_t>(c)].empty())
                throw std::invalid_argument("split: class " + std::to_string(c) +
                                            " has zero samples, cannot stratify");

        // Largest-remainder apportionment: every class contributes floor or
        // ceil of its share and the totals hit target_train exactly.
        std::vector<index_t> take(static_cast<std::size_t>(ds.n_classes));
        std::vector<std::pair<double, int>> remainders;
        index_t assigned = 0;
        for (int c = 0; c < ds.n_classes; ++c) {
            const double share = spec.train_fraction *
                                 static_cast<double>(by_class[static_cast<std::size_t>(c)].size());
            take[static_cast<std::size_t>(c)] = static_cast<index_t>(std::floor(share));
            assigned += take[static_cast<std::size_t>(c)];
            remainders.push_back({share - std::floor(share), c});
        }
        std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (std::size_t k = 0; assigned < target_train && k < remainders.size(); ++k) {
            const int c = remainders[k].second;
            if (take[static_cast<std::size_t>(c)] <
                static_cast<index_t>(by_class[static_cast<std::size_t>(c)].size())) {
                ++take[static_cast<std::size_t>(c)];
                ++assigned;
            }
        }
        for (int c = 0; c < ds.n_classes; ++c) {
            auto& idx = by_class[static_cast<std::size_t>(c)];
            std::shuffle(idx.begin(), idx.end(), rng);
            for (std::size_t k = 0; k < idx.size(); ++k) {
                if (static_cast<index_t>(k) < take[static_cast<std::size_t>(c)])
                    train_idx.push_back(idx[k]);
                else
                    test_idx.push_back(idx[k]);
            }
        }
        std::sort(train_idx.begin(), train_idx.end());
        std::sort(test_idx.begin(), test_idx.end());
    } else {
        std::vector<index_t> all(static_cast<std::size_t>(ds.n_samples));
        std::iota(all.begin(), all.end(), index_t(0));
        std::shuffle(all.begin(), all.end(), rng);
        train_idx.assign(all.begin(), all.begin() + target_train);
        test_idx.assign(all.begin() + target_train, all.end());
        std::sort(train_idx.begin(), train_idx.end());
        std::sort(test_idx.begin(), test_idx.end());
    }

    auto gather = [&](const std::vector<index_t>& idx) {
        Dataset out;
        out.n_samples = static_cast<index_t>(idx.size());
        out.n_features = ds.n_features;
        out.n_classes = ds.n_classes;
        out.class_names = ds.class_names;
        out.features.reserve(idx.size() * static_cast<std::size_t>(ds.n_features));
        out.labels.reserve(idx.size());
        for (auto i : idx) {
            const auto* row = ds.features.data() + i * ds.n_features;
            out.features.insert(out.features.end(), row, row + ds.n_features);
            out.labels.push_back(ds.labels[static_cast<std::size_t>(i)]);
        }
        return out;
    };
    return {gather(train_idx), gather(test_idx)};
}

std::pair<Dataset, Dataset> normalize(const Dataset& train, const Dataset& test,
                                      ScalingKind kind) {
    if (train.n_samples == 0) throw std::invalid_argument("normalize: empty training set");
    if (test.n_features != train.n_features)
        throw std::invalid_argument("normalize: feature counts differ");

    Dataset tr = train, te = test;
    if (kind == ScalingKind::none) return {tr, te};

    FeatureScaling sc;
    sc.kind = kind;
    sc.offset.resize(static_cast<std::size_t>(train.n_features));
    sc.scale.resize(static_cast<std::size_t>(train.n_features));

    for (index_t f = 0; f < train.n_features; ++f) {
        if (kind == ScalingKind::minmax) {
            real lo = train.feature(0, f), hi = lo;
            for (index_t i = 1; i < train.n_samples; ++i) {
                lo = std::min(lo, train.feature(i, f));
                hi = std::max(hi, train.feature(i, f));
            }
            sc.offset[static_cast<std::size_t>(f)] = lo;
            sc.scale[static_cast<std::size_t>(f)] = hi - lo;
        } else {
            double mean = 0;
            for (index_t i = 0; i < train.n_samples; ++i) mean += train.feature(i, f);
            mean /= static_cast<double>(train.n_samples);
            double var = 0;
            for (index_t i = 0; i < train.n_samples; ++i) {
                const double d = train.feature(i, f) - mean;
                var += d * d;
            }
            var /= static_cast<double>(train.n_samples);
            sc.offset[static_cast<std::size_t>(f)] = static_cast<real>(mean);
            sc.scale[static_cast<std::size_t>(f)] = static_cast<real>(std::sqrt(var));
        }
    }

    auto apply = [&](Dataset& d) {
        for (index_t i = 0; i < d.n_samples; ++i) {
            for (index_t f = 0; f < d.n_features; ++f) {
                auto& v = d.features[static_cast<std::size_t>(i * d.n_features + f)];
                const real s = sc.scale[static_cast<std::size_t>(f)];
                // Constant feature in train: maps to 0 everywhere.
                v = s == real(0) ? real(0)
                                 : (v - sc.offset[static_cast<std::size_t>(f)]) / s;
            }
        }
        d.scaling = sc;
    };
    apply(tr);
    apply(te);
    return {tr, te};
}

Dataset denormalize(const Dataset& ds) {
    if (ds.scaling.kind == ScalingKind::none) return ds;
    Dataset out = ds;
    for (index_t i = 0; i < out.n_samples; ++i) {
        for (index_t f = 0; f < out.n_features; ++f) {
            auto& v = out.features[static_cast<std::size_t>(i * out.n_features + f)];
            const real s = out.scaling.scale[static_cast<std::size_t>(f)];
            const real o = out.scaling.offset[static_cast<std::size_t>(f)];
            v = s == real(0) ? o : v * s + o;
        }
    }
    out.scaling = FeatureScaling{};
    return out;
}

Dataset synth_hdls(index_t n_samples, index_t n_features, int n_classes, index_t n_informative,
                   double noise, std::uint64_t seed) {
    if (n_informative > n_features)
        throw std::invalid_argument("synth_hdls: n_informative > n_features");
    if (n_classes < 1 || n_samples < 1 || n_features < 1)
        throw std::invalid_argument("synth_hdls: dimensions must be >= 1");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);

    // Class centroids on the informative block, spread well apart relative to
    // a unit noise scale.
    std::vector<double> means(static_cast<std::size_t>(n_classes) *
                              static_cast<std::size_t>(n_informative));
    for (auto& m : means) m = unit(rng) * 3.0;

    Dataset ds;
    ds.n_samples = n_samples;
    ds.n_features = n_features;
    ds.n_classes = n_classes;
    ds.features.resize(static_cast<std::size_t>(n_samples) *
                       static_cast<std::size_t>(n_features));
    ds.labels.resize(static_cast<std::size_t>(n_samples));
    for (int c = 0; c < n_classes; ++c) ds.class_names.push_back("class_" + std::to_string(c));

    for (index_t i = 0; i < n_samples; ++i) {
        const int label = static_cast<int>(i % n_classes);
        ds.labels[static_cast<std::size_t>(i)] = label;
        real* row = ds.features.data() + i * n_features;
        for (index_t f = 0; f < n_features; ++f) {
            const double base =
                f < n_informative
                    ? means[static_cast<std::size_t>(label) * n_informative + f]
                    : 0.0;
            row[f] = static_cast<real>(base + noise * unit(rng));
        }
    }
    return ds;
}

DenseMatrix make_batch(const Dataset& ds, std::span<const index_t> sample_indices) {
    DenseMatrix x(ds.n_features, static_cast<index_t>(sample_indices.size()));
    for (std::size_t b = 0; b < sample_indices.size(); ++b) {
        const real* row = ds.features.data() + sample_indices[b] * ds.n_features;
        for (index_t f = 0; f < ds.n_features; ++f)
            x(f, static_cast<index_t>(b)) = row[f];
    }
    return x;
}

} // namespace sevo
