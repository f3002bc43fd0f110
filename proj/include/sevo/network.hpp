#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sevo/data.hpp"
#include "sevo/dense.hpp"
#include "sevo/metrics.hpp"
#include "sevo/sparse.hpp"
#include "sevo/topology.hpp"

namespace sevo {

enum class Activation : std::uint8_t { relu = 0, sigmoid = 1, softmax_output = 2 };
enum class EvolutionImpl { v1 = 1, v2 = 2 };

/// One sparsely connected layer: weights (n_out x n_in) in CSR, dense biases,
/// and per-connection momentum aligned with weights.vals. pattern_rows caches
/// the COO row expansion used by the gradient kernel; it is refreshed
/// whenever the connectivity changes.
struct SparseLayer {
    CsrMatrix weights;
    std::vector<real> bias;
    std::vector<real> weight_momentum;
    std::vector<real> bias_momentum;
    Activation activation = Activation::relu;
    std::vector<index_t> pattern_rows;

    index_t n_out() const { return weights.n_rows; }
    index_t n_in() const { return weights.n_cols; }
    void refresh_pattern();
};

struct NetworkConfig {
    std::vector<index_t> layer_widths; // n^0 .. n^L
    TopologyParams topology;
    double learning_rate = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0002;
    index_t batch_size = 5;
    int epochs = 500;
    double dropout_rate = 0.0; // applied to every hidden layer
    bool evolution_enabled = true;
    EvolutionImpl evolution_impl = EvolutionImpl::v2;
    Activation hidden_activation = Activation::relu;

    void validate() const;
};

struct ForwardCache {
    std::vector<DenseMatrix> activations;    // a^0 .. a^L (post-dropout)
    std::vector<DenseMatrix> preacts;        // z^1 .. z^L
    std::vector<DenseMatrix> dropout_scales; // one per hidden layer; empty columns kind when off
    bool train_mode = false;
};

struct LayerGradients {
    std::vector<real> weights; // aligned with the layer's weights.vals
    std::vector<real> bias;
};
using Gradients = std::vector<LayerGradients>;

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double test_accuracy = 0.0;
    double epoch_seconds = 0.0;
    index_t nnz_total = 0;
};
using History = std::vector<EpochStats>;

class Network {
public:
    explicit Network(NetworkConfig config);
    Network(NetworkConfig config, std::vector<SparseLayer> layers);

    const NetworkConfig& config() const { return config_; }
    const std::vector<SparseLayer>& layers() const { return layers_; }
    SparseLayer& layer(std::size_t l) { return layers_[l]; }

    /// Feed-forward over a (n^0, B) batch. train_mode enables inverted
    /// dropout on hidden activations. The output layer is a softmax; its
    /// columns sum to 1.
    DenseMatrix forward(const DenseMatrix& x, bool train_mode, ForwardCache* cache = nullptr);

    /// Cross-entropy deltas and per-connection gradients for the cached batch.
    Gradients backward(const ForwardCache& cache, std::span<const std::int32_t> labels) const;

    /// Momentum SGD with weight decay, touching pattern positions only;
    /// biases carry no weight decay.
    void sgd_step(const Gradients& grads);

    /// Shuffle + minibatch pass over the training set (last partial batch
    /// kept). Returns the mean cross-entropy over the epoch.
    double train_epoch(const Dataset& train);

    /// Prune-regrow every layer with the configured implementation. Momentum
    /// of pruned connections is discarded; regrown connections start at zero.
    std::vector<EvolutionReport> evolve_layers();

    double evaluate(const Dataset& test, ConfusionMatrix* cm = nullptr);

    /// Full training loop: per epoch train, evolve (skipped after the final
    /// epoch and when evolution is off), then evaluate and record.
    History train(const Dataset& train_set, const Dataset& test_set);

    double batch_loss(const DenseMatrix& probs, std::span<const std::int32_t> labels) const;

    index_t connection_count() const;
    index_t parameter_count() const; // connections + biases

private:
    NetworkConfig config_;
    std::vector<SparseLayer> layers_;
    std::vector<EvolveRng> evolve_rngs_;
    std::mt19937_64 shuffle_rng_;
    std::mt19937_64 dropout_rng_;
};

/// Versioned binary checkpoint (magic "SEVO"); load(save(net)) reproduces
/// widths, weights, biases and activations bit-exactly.
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path, NetworkConfig base_config = {});

} // namespace sevo
