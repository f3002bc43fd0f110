#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sevo/data.hpp"
#include "sevo/network.hpp"

namespace sevo {

enum class DataSource { csv, binary, synthetic };

struct SynthSpec {
    index_t samples = 150;
    index_t features = 1000;
    int classes = 3;
    index_t informative = 30;
    double noise = 1.0;
};

/// One experiment run: data source, split, architecture and trainer knobs,
/// trial battery, output directory.
struct ExperimentConfig {
    DataSource source = DataSource::synthetic;
    std::string csv_path;
    index_t label_column = -1;  // -1: last column
    std::string label_name;     // overrides label_column when set
    bool csv_has_header = true;
    std::string binary_path;
    SynthSpec synth;

    double train_fraction = 2.0 / 3.0;
    bool stratified = true;
    ScalingKind scaling = ScalingKind::minmax;

    std::vector<index_t> hidden_widths = {100};
    NetworkConfig net; // layer_widths filled in from the data + hidden_widths

    int trials = 1;
    std::uint64_t seed = 42;
    std::string out_dir = "run";
    int threads = 1;
    int parallel_trials = 1;

    void validate() const;
};

struct TrialResult {
    int trial = 0;
    History history;
    double best_accuracy = 0.0;
    double final_accuracy = 0.0;
};

struct TrainOutcome {
    std::vector<TrialResult> trials;
    int best_trial = 0;
    double mean_best_accuracy = 0.0;
    double std_best_accuracy = 0.0;
    std::string history_csv;
    std::string confusion_csv;
    std::string summary_txt;
    std::string model_file;
    std::string test_set_file;
};

/// `train`: runs the trial battery, writes history.csv / confusion.csv /
/// summary.txt / model.sevo / test_set.sevd into out_dir.
TrainOutcome run_train(const ExperimentConfig& cfg);

struct BenchRow {
    index_t size = 0;
    std::string impl;
    double mean_s = 0.0;
    double std_s = 0.0;
};

/// `bench-evolution`: verifies both implementations produce identical results
/// on each size (aborts otherwise), then reports mean/std evolution wall time
/// per implementation. Writes bench.csv into out_dir. Always single-threaded.
std::vector<BenchRow> run_bench_evolution(std::span<const index_t> sizes, double epsilon,
                                          double zeta, int repeats, std::uint64_t seed,
                                          const std::string& out_dir);

struct ExtremeConfig {
    std::vector<index_t> widths;
    double epsilon = 10.0;
    double zeta = 0.3;
    int epochs = 1;
    index_t samples = 100;
    index_t batch_size = 5;
    double learning_rate = 0.05;
    double dropout = 0.4;
    std::uint64_t seed = 42;
    std::string out_dir = "run";
    double mem_limit_gb = 16.0;
    index_t reference_connections = 0; // external figure to print alongside, 0 = none
};

struct MemoryEstimate {
    std::vector<std::pair<std::string, double>> parts; // label, bytes
    double total_bytes = 0.0;
    std::string breakdown() const;
};

MemoryEstimate estimate_memory(std::span<const index_t> widths, double epsilon, index_t batch,
                               index_t samples);

struct ExtremeReport {
    std::vector<index_t> widths;
    index_t total_neurons = 0;
    index_t realized_connections = 0;
    index_t expected_connections = 0;
    index_t reference_connections = 0;
    MemoryEstimate estimate;
    std::uint64_t vm_hwm_bytes = 0; // OS probe; 0 when unavailable
    std::vector<double> epoch_seconds;
    std::vector<double> epoch_loss;
    std::string report_file;
};

/// `extreme`: builds the requested architecture, reports neuron/connection
/// accounting and the analytic memory estimate, then trains the requested
/// epochs on synthetic data of matching shape. Refuses to start if the
/// estimate exceeds mem_limit_gb.
ExtremeReport run_extreme(const ExtremeConfig& cfg);

struct EvalOutcome {
    double accuracy = 0.0;
    index_t samples = 0;
    std::string confusion_csv;
};

/// `eval`: load a checkpoint and a dataset, score, write confusion.csv.
EvalOutcome run_eval(const std::string& model_path, const std::string& data_path,
                     const std::string& out_dir);

void write_history_csv(const std::string& path, std::span<const TrialResult> trials);

/// History file with the epoch_seconds column blanked, for byte comparisons
/// that must ignore wall-clock noise.
std::string history_csv_without_timing(const std::string& path);

} // namespace sevo
