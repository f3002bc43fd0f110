#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sevo/dense.hpp"
#include "sevo/types.hpp"

namespace sevo {

enum class ScalingKind { none, minmax, zscore };

/// Per-feature scaling parameters, fitted on the training split only.
struct FeatureScaling {
    ScalingKind kind = ScalingKind::none;
    std::vector<real> offset; // min (minmax) or mean (zscore)
    std::vector<real> scale;  // max-min or std; 0 marks a constant feature
};

/// In-memory dataset: dense row-major feature matrix (samples x features)
/// with integer class labels. Feature matrices stay dense — only network
/// weights are sparse.
struct Dataset {
    index_t n_samples = 0;
    index_t n_features = 0;
    int n_classes = 0;
    std::vector<real> features; // n_samples * n_features, row-major
    std::vector<std::int32_t> labels;
    std::vector<std::string> class_names;
    FeatureScaling scaling;

    real feature(index_t sample, index_t f) const {
        return features[static_cast<std::size_t>(sample * n_features + f)];
    }
    void validate() const;
};

struct SplitSpec {
    double train_fraction = 2.0 / 3.0;
    bool stratified = true;
    std::uint64_t seed = 0;
};

class CsvParseError : public std::runtime_error {
public:
    CsvParseError(const std::string& msg, index_t row, index_t col);
    index_t row; // 1-based, including any header line
    index_t col; // 1-based; 0 when the error is not tied to a column
};

/// Comma-separated loader. label_column is a 0-based column index, or -1 for
/// the last column. String labels map to dense ids in first-appearance order.
Dataset load_csv(const std::string& path, index_t label_column = -1, bool has_header = true);
/// Same, selecting the label column by header name.
Dataset load_csv_by_label_name(const std::string& path, const std::string& label_name);
void save_csv(const Dataset& ds, const std::string& path);

/// Generic comma-separated table reader (no typing); used to re-parse the
/// tool's own emitted CSVs.
std::vector<std::vector<std::string>> read_csv_table(const std::string& path);

/// Versioned binary container (magic "SEVD"); round-trips bit-exactly.
Dataset load_binary(const std::string& path);
void save_binary(const Dataset& ds, const std::string& path);

/// Deterministic train/test split; stratified mode keeps per-class
/// proportions within floor/ceil of the fraction while the overall train
/// count is round(train_fraction * n_samples).
std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec);

/// Fit scaling on train, apply to both. minmax maps the train range to [0,1]
/// (constant features to 0); zscore standardizes. Returns scaled copies with
/// the fitted parameters recorded on both datasets.
std::pair<Dataset, Dataset> normalize(const Dataset& train, const Dataset& test,
                                      ScalingKind kind = ScalingKind::minmax);
/// Invert the fitted scaling (training-split values reproduce exactly).
Dataset denormalize(const Dataset& ds);

/// Synthetic high-dimension / low-sample generator: class-conditional
/// Gaussian means on the first n_informative features, label-independent
/// noise elsewhere; feature noise std = `noise`. Deterministic by seed.
Dataset synth_hdls(index_t n_samples, index_t n_features, int n_classes, index_t n_informative,
                   double noise, std::uint64_t seed);

/// Batch assembly: gather the given samples as columns, (n_features, B).
DenseMatrix make_batch(const Dataset& ds, std::span<const index_t> sample_indices);

} // namespace sevo
