#include "sevo/network.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "sevo/kernels.hpp"

namespace sevo {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t n) {
    return splitmix64(seed ^ splitmix64(tag ^ splitmix64(n)));
}

real sigmoid(real z) { return real(1) / (real(1) + std::exp(-z)); }

void softmax_columns(DenseMatrix& z) {
    const index_t n = z.rows(), B = z.cols();
    for (index_t b = 0; b < B; ++b) {
        real m = z(0, b);
        for (index_t i = 1; i < n; ++i) m = std::max(m, z(i, b));
        real sum = 0;
        for (index_t i = 0; i < n; ++i) {
            const real e = std::exp(z(i, b) - m);
            z(i, b) = e;
            sum += e;
        }
        for (index_t i = 0; i < n; ++i) z(i, b) /= sum;
    }
}

} // namespace

void SparseLayer::refresh_pattern() {
    pattern_rows.resize(static_cast<std::size_t>(weights.nnz()));
    for (index_t i = 0; i < weights.n_rows; ++i) {
        for (index_t k = weights.row_ptr[static_cast<std::size_t>(i)];
             k < weights.row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
            pattern_rows[static_cast<std::size_t>(k)] = i;
    }
}

void NetworkConfig::validate() const {
    if (layer_widths.size() < 2)
        throw std::invalid_argument("NetworkConfig: need >= 2 layer widths");
    for (auto w : layer_widths)
        if (w < 1) throw std::invalid_argument("NetworkConfig: layer widths must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("NetworkConfig: batch_size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("NetworkConfig: epochs must be >= 1");
    if (!(learning_rate > 0)) throw std::invalid_argument("NetworkConfig: learning_rate must be > 0");
    if (!(momentum >= 0 && momentum < 1))
        throw std::invalid_argument("NetworkConfig: momentum must be in [0, 1)");
    if (!(weight_decay >= 0))
        throw std::invalid_argument("NetworkConfig: weight_decay must be >= 0");
    if (!(dropout_rate >= 0 && dropout_rate < 1))
        throw std::invalid_argument("NetworkConfig: dropout_rate must be in [0, 1)");
    topology.validate();
}

Network::Network(NetworkConfig config) : config_(std::move(config)) {
    config_.validate();
    const auto& widths = config_.layer_widths;
    const std::size_t L = widths.size() - 1;
    const std::uint64_t seed = config_.topology.rng_seed;

    layers_.reserve(L);
    for (std::size_t l = 1; l <= L; ++l) {
        TopologyParams lp = config_.topology;
        lp.rng_seed = derive_seed(seed, 0x696e6974, l); // weight init stream
        const real weight_sigma =
            static_cast<real>(std::sqrt(2.0 / static_cast<double>(widths[l - 1])));
        SparseLayer layer;
        layer.weights = er_init(widths[l - 1], widths[l], lp, weight_sigma);
        layer.bias.assign(static_cast<std::size_t>(widths[l]), real(0));
        layer.weight_momentum.assign(static_cast<std::size_t>(layer.weights.nnz()), real(0));
        layer.bias_momentum.assign(static_cast<std::size_t>(widths[l]), real(0));
        layer.activation = l == L ? Activation::softmax_output : config_.hidden_activation;
        layer.refresh_pattern();
        layers_.push_back(std::move(layer));
        evolve_rngs_.push_back(make_evolve_rng(derive_seed(seed, 0x65766f6c, l)));
    }
    shuffle_rng_.seed(derive_seed(seed, 0x73687566, 0));
    dropout_rng_.seed(derive_seed(seed, 0x64726f70, 0));
}

Network::Network(NetworkConfig config, std::vector<SparseLayer> layers)
    : config_(std::move(config)), layers_(std::move(layers)) {
    config_.validate();
    if (layers_.size() != config_.layer_widths.size() - 1)
        throw std::invalid_argument("Network: layer count does not match widths");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (layers_[l].n_in() != config_.layer_widths[l] ||
            layers_[l].n_out() != config_.layer_widths[l + 1])
            throw std::invalid_argument("Network: layer dimensions do not chain");
        if (layers_[l].weight_momentum.size() != static_cast<std::size_t>(layers_[l].weights.nnz()))
            layers_[l].weight_momentum.assign(static_cast<std::size_t>(layers_[l].weights.nnz()),
                                              real(0));
        if (layers_[l].bias_momentum.size() != layers_[l].bias.size())
            layers_[l].bias_momentum.assign(layers_[l].bias.size(), real(0));
        layers_[l].refresh_pattern();
        evolve_rngs_.push_back(
            make_evolve_rng(derive_seed(config_.topology.rng_seed, 0x65766f6c, l + 1)));
    }
    shuffle_rng_.seed(derive_seed(config_.topology.rng_seed, 0x73687566, 0));
    dropout_rng_.seed(derive_seed(config_.topology.rng_seed, 0x64726f70, 0));
}

DenseMatrix Network::forward(const DenseMatrix& x, bool train_mode, ForwardCache* cache) {
    if (x.rows() != config_.layer_widths.front())
        throw std::invalid_argument("forward: input width mismatch");
    if (x.cols() < 1) throw std::invalid_argument("forward: empty batch");
    for (std::size_t k = 0; k < x.size(); ++k)
        if (!std::isfinite(static_cast<double>(x.data()[k])))
            throw std::invalid_argument("forward: non-finite input value");

    const std::size_t L = layers_.size();
    const bool dropout_on = train_mode && config_.dropout_rate > 0.0;
    const real keep = static_cast<real>(1.0 - config_.dropout_rate);
    std::bernoulli_distribution keep_dist(1.0 - config_.dropout_rate);

    if (cache) {
        cache->activations.clear();
        cache->preacts.clear();
        cache->dropout_scales.clear();
        cache->train_mode = train_mode;
        cache->activations.push_back(x);
    }

    DenseMatrix a = x;
    for (std::size_t l = 0; l < L; ++l) {
        const SparseLayer& layer = layers_[l];
        DenseMatrix z = spmm(layer.weights, a);
        const index_t B = z.cols();
        for (index_t i = 0; i < z.rows(); ++i) {
            const real b = layer.bias[static_cast<std::size_t>(i)];
            for (index_t col = 0; col < B; ++col) z(i, col) += b;
        }
        if (cache) cache->preacts.push_back(z);

        if (l + 1 == L) {
            softmax_columns(z);
            a = std::move(z);
        } else {
            if (layer.activation == Activation::relu) {
                for (std::size_t k = 0; k < z.size(); ++k)
                    z.data()[k] = z.data()[k] > 0 ? z.data()[k] : real(0);
            } else {
                for (std::size_t k = 0; k < z.size(); ++k) z.data()[k] = sigmoid(z.data()[k]);
            }
            if (dropout_on) {
                DenseMatrix scale(z.rows(), z.cols());
                for (std::size_t k = 0; k < scale.size(); ++k) {
                    const real s = keep_dist(dropout_rng_) ? real(1) / keep : real(0);
                    scale.data()[k] = s;
                    z.data()[k] *= s;
                }
                if (cache) cache->dropout_scales.push_back(std::move(scale));
            } else if (cache) {
                cache->dropout_scales.emplace_back();
            }
            a = std::move(z);
        }
        if (cache) cache->activations.push_back(a);
    }
    return a;
}

Gradients Network::backward(const ForwardCache& cache,
                            std::span<const std::int32_t> labels) const {
    const std::size_t L = layers_.size();
    if (cache.activations.size() != L + 1 || cache.preacts.size() != L)
        throw std::invalid_argument("backward: incomplete forward cache");
    const DenseMatrix& out = cache.activations.back();
    const index_t B = out.cols();
    if (static_cast<index_t>(labels.size()) != B)
        throw std::invalid_argument("backward: label count != batch size");
    const index_t n_classes = out.rows();
    for (auto y : labels)
        if (y < 0 || y >= n_classes) throw std::out_of_range("backward: label out of range");

    // Softmax + cross-entropy: output delta is probabilities minus one-hot.
    DenseMatrix delta = out;
    for (index_t b = 0; b < B; ++b) delta(labels[static_cast<std::size_t>(b)], b) -= real(1);

    Gradients grads(L);
    for (std::size_t l = L; l-- > 0;) {
        const SparseLayer& layer = layers_[l];
        grads[l].weights = sparse_gradient(layer.pattern_rows, layer.weights.col_idx, delta,
                                           cache.activations[l]);
        grads[l].bias.assign(static_cast<std::size_t>(layer.n_out()), real(0));
        for (index_t i = 0; i < layer.n_out(); ++i) {
            real acc = 0;
            for (index_t b = 0; b < B; ++b) acc += delta(i, b);
            grads[l].bias[static_cast<std::size_t>(i)] = acc / static_cast<real>(B);
        }

        if (l > 0) {
            DenseMatrix dprev = spmm_transpose(layer.weights, delta);
            const DenseMatrix& z = cache.preacts[l - 1];
            const SparseLayer& prev = layers_[l - 1];
            if (prev.activation == Activation::relu) {
                for (std::size_t k = 0; k < dprev.size(); ++k)
                    if (z.data()[k] <= 0) dprev.data()[k] = 0;
            } else {
                for (std::size_t k = 0; k < dprev.size(); ++k) {
                    const real s = sigmoid(z.data()[k]);
                    dprev.data()[k] *= s * (real(1) - s);
                }
            }
            if (cache.train_mode && l - 1 < cache.dropout_scales.size() &&
                cache.dropout_scales[l - 1].size() > 0) {
                const DenseMatrix& scale = cache.dropout_scales[l - 1];
                for (std::size_t k = 0; k < dprev.size(); ++k) dprev.data()[k] *= scale.data()[k];
            }
            delta = std::move(dprev);
        }
    }
    return grads;
}

void Network::sgd_step(const Gradients& grads) {
    if (grads.size() != layers_.size())
        throw std::invalid_argument("sgd_step: gradient layer count mismatch");
    const real lr = static_cast<real>(config_.learning_rate);
    const real mu = static_cast<real>(config_.momentum);
    const real wd = static_cast<real>(config_.weight_decay);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        SparseLayer& layer = layers_[l];
        if (grads[l].weights.size() != layer.weights.vals.size() ||
            grads[l].bias.size() != layer.bias.size())
            throw std::invalid_argument("sgd_step: gradients not aligned with layer");
        for (std::size_t k = 0; k < layer.weights.vals.size(); ++k) {
            real& v = layer.weight_momentum[k];
            real& w = layer.weights.vals[k];
            v = mu * v - lr * (grads[l].weights[k] + wd * w);
            w += v;
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            real& v = layer.bias_momentum[i];
            v = mu * v - lr * grads[l].bias[i];
            layer.bias[i] += v;
        }
    }
}

double Network::batch_loss(const DenseMatrix& probs,
                           std::span<const std::int32_t> labels) const {
    const index_t B = probs.cols();
    double loss = 0;
    for (index_t b = 0; b < B; ++b) {
        const double p =
            std::max(static_cast<double>(probs(labels[static_cast<std::size_t>(b)], b)), 1e-300);
        loss -= std::log(p);
    }
    return loss / static_cast<double>(B);
}

double Network::train_epoch(const Dataset& train) {
    if (train.n_samples == 0) throw std::invalid_argument("train_epoch: empty dataset");
    std::vector<index_t> order(static_cast<std::size_t>(train.n_samples));
    std::iota(order.begin(), order.end(), index_t(0));
    std::shuffle(order.begin(), order.end(), shuffle_rng_);

    double loss_sum = 0;
    index_t seen = 0;
    for (index_t start = 0; start < train.n_samples; start += config_.batch_size) {
        const index_t stop = std::min(start + config_.batch_size, train.n_samples);
        const std::span<const index_t> idx(order.data() + start,
                                           static_cast<std::size_t>(stop - start));
        DenseMatrix x = make_batch(train, idx);
        std::vector<std::int32_t> labels(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k)
            labels[k] = train.labels[static_cast<std::size_t>(idx[k])];

        ForwardCache cache;
        const DenseMatrix probs = forward(x, true, &cache);
        loss_sum += batch_loss(probs, labels) * static_cast<double>(idx.size());
        sgd_step(backward(cache, labels));
        seen += stop - start;
    }
    return loss_sum / static_cast<double>(seen);
}

std::vector<EvolutionReport> Network::evolve_layers() {
    std::vector<EvolutionReport> reports;
    reports.reserve(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        SparseLayer& layer = layers_[l];
        std::vector<std::size_t> pruned;
        auto [next, report] =
            config_.evolution_impl == EvolutionImpl::v1
                ? evolve_v1(layer.weights, config_.topology, evolve_rngs_[l], &pruned)
                : evolve_v2(layer.weights, config_.topology, evolve_rngs_[l], &pruned);

        // Survivor entries keep their momentum; regrown entries start at 0.
        // Survivors stay in row-major order in the new matrix, so one merge
        // walk over (old minus pruned) and the new entries realigns momentum.
        // A regrown connection landing on a just-pruned position is not a
        // survivor; the pruned-index skip below keeps it at zero momentum.
        const auto& ow = layer.weights;
        std::vector<real> momentum(static_cast<std::size_t>(next.nnz()), real(0));
        const auto advance_row = [](const CsrMatrix& m, index_t& row, std::size_t k) {
            while (row < m.n_rows &&
                   static_cast<index_t>(k) >= m.row_ptr[static_cast<std::size_t>(row) + 1])
                ++row;
        };
        std::size_t prune_i = 0, old_k = 0;
        index_t orow = 0, nrow = 0;
        for (std::size_t new_k = 0; new_k < static_cast<std::size_t>(next.nnz()); ++new_k) {
            advance_row(next, nrow, new_k);
            while (prune_i < pruned.size() && pruned[prune_i] == old_k) {
                ++prune_i;
                ++old_k;
            }
            if (old_k < static_cast<std::size_t>(ow.nnz())) {
                advance_row(ow, orow, old_k);
                if (orow == nrow && ow.col_idx[old_k] == next.col_idx[new_k]) {
                    momentum[new_k] = layer.weight_momentum[old_k];
                    ++old_k;
                }
            }
        }

        layer.weights = std::move(next);
        layer.weight_momentum = std::move(momentum);
        layer.refresh_pattern();
        reports.push_back(report);
    }
    return reports;
}

double Network::evaluate(const Dataset& test, ConfusionMatrix* cm_out) {
    if (test.n_features != config_.layer_widths.front())
        throw std::invalid_argument("evaluate: dataset width does not match input layer");
    ConfusionMatrix cm(static_cast<int>(config_.layer_widths.back()));

    // Cap the eval batch so activation buffers stay modest even for very wide
    // hidden layers.
    index_t max_width = 0;
    for (auto w : config_.layer_widths) max_width = std::max(max_width, w);
    const index_t batch =
        std::clamp<index_t>(static_cast<index_t>((8u << 20) / static_cast<std::uint64_t>(max_width)),
                            1, 512);

    std::vector<index_t> idx;
    for (index_t start = 0; start < test.n_samples; start += batch) {
        const index_t stop = std::min(start + batch, test.n_samples);
        idx.resize(static_cast<std::size_t>(stop - start));
        std::iota(idx.begin(), idx.end(), start);
        const DenseMatrix x = make_batch(test, idx);
        const DenseMatrix probs = forward(x, false, nullptr);
        for (index_t b = 0; b < probs.cols(); ++b) {
            int best = 0;
            for (index_t i = 1; i < probs.rows(); ++i)
                if (probs(i, b) > probs(best, b)) best = static_cast<int>(i);
            cm.accumulate(best, test.labels[static_cast<std::size_t>(start + b)]);
        }
    }
    const auto acc = cm.accuracy();
    if (cm_out) *cm_out = cm;
    return acc.value_or(0.0);
}

History Network::train(const Dataset& train_set, const Dataset& test_set) {
    if (train_set.n_samples == 0) throw std::invalid_argument("train: empty training set");
    History history;
    history.reserve(static_cast<std::size_t>(config_.epochs));
    for (int epoch = 0; epoch < config_.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double loss = train_epoch(train_set);
        if (config_.evolution_enabled && epoch + 1 < config_.epochs) evolve_layers();
        const double acc = evaluate(test_set);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        history.push_back({epoch, loss, acc, secs, connection_count()});
    }
    return history;
}

index_t Network::connection_count() const {
    index_t total = 0;
    for (const auto& l : layers_) total += l.weights.nnz();
    return total;
}

index_t Network::parameter_count() const {
    index_t total = connection_count();
    for (const auto& l : layers_) total += static_cast<index_t>(l.bias.size());
    return total;
}

namespace {

constexpr char kModelMagic[4] = {'S', 'E', 'V', 'O'};
constexpr std::uint32_t kModelVersion = 1;

void put(std::ofstream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void get(std::ifstream& is, void* p, std::size_t n, const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw std::runtime_error(std::string("checkpoint truncated while reading ") + what);
}

} // namespace

void save_checkpoint(const Network& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
    put(os, kModelMagic, 4);
    put(os, &kModelVersion, sizeof(kModelVersion));
    const std::uint8_t dtype = sizeof(real);
    put(os, &dtype, 1);
    const auto& widths = net.config().layer_widths;
    const std::uint32_t L = static_cast<std::uint32_t>(widths.size() - 1);
    put(os, &L, sizeof(L));
    for (auto w : widths) {
        const std::uint64_t v = static_cast<std::uint64_t>(w);
        put(os, &v, sizeof(v));
    }
    for (const auto& layer : net.layers()) {
        const std::uint8_t act = static_cast<std::uint8_t>(layer.activation);
        put(os, &act, 1);
        const std::uint64_t nnz = static_cast<std::uint64_t>(layer.weights.nnz());
        put(os, &nnz, sizeof(nnz));
        put(os, layer.weights.row_ptr.data(), layer.weights.row_ptr.size() * sizeof(index_t));
        put(os, layer.weights.col_idx.data(), layer.weights.col_idx.size() * sizeof(index_t));
        put(os, layer.weights.vals.data(), layer.weights.vals.size() * sizeof(real));
        put(os, layer.bias.data(), layer.bias.size() * sizeof(real));
    }
    if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Network load_checkpoint(const std::string& path, NetworkConfig base_config) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[4];
    get(is, magic, 4, "magic");
    if (std::memcmp(magic, kModelMagic, 4) != 0)
        throw std::runtime_error("load_checkpoint: bad magic, not a model file");
    std::uint32_t version = 0;
    get(is, &version, sizeof(version), "version");
    if (version != kModelVersion)
        throw std::runtime_error("load_checkpoint: unsupported version " +
                                 std::to_string(version));
    std::uint8_t dtype = 0;
    get(is, &dtype, 1, "dtype");
    if (dtype != sizeof(real))
        throw std::runtime_error("load_checkpoint: dtype width " + std::to_string(dtype) +
                                 " does not match this build");
    std::uint32_t L = 0;
    get(is, &L, sizeof(L), "layer count");
    if (L == 0) throw std::runtime_error("load_checkpoint: zero layers");
    std::vector<index_t> widths(L + 1);
    for (auto& w : widths) {
        std::uint64_t v = 0;
        get(is, &v, sizeof(v), "widths");
        w = static_cast<index_t>(v);
    }
    std::vector<SparseLayer> layers(L);
    for (std::uint32_t l = 0; l < L; ++l) {
        SparseLayer& layer = layers[l];
        std::uint8_t act = 0;
        get(is, &act, 1, "activation");
        if (act > 2) throw std::runtime_error("load_checkpoint: bad activation tag");
        layer.activation = static_cast<Activation>(act);
        std::uint64_t nnz = 0;
        get(is, &nnz, sizeof(nnz), "nnz");
        layer.weights.n_rows = widths[l + 1];
        layer.weights.n_cols = widths[l];
        layer.weights.row_ptr.resize(static_cast<std::size_t>(widths[l + 1]) + 1);
        layer.weights.col_idx.resize(nnz);
        layer.weights.vals.resize(nnz);
        get(is, layer.weights.row_ptr.data(), layer.weights.row_ptr.size() * sizeof(index_t),
            "row_ptr");
        get(is, layer.weights.col_idx.data(), nnz * sizeof(index_t), "col_idx");
        get(is, layer.weights.vals.data(), nnz * sizeof(real), "vals");
        layer.bias.resize(static_cast<std::size_t>(widths[l + 1]));
        get(is, layer.bias.data(), layer.bias.size() * sizeof(real), "bias");
        validate(layer.weights);
    }
    base_config.layer_widths = widths;
    return Network(std::move(base_config), std::move(layers));
}

} // namespace sevo
