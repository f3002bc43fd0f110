#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "sevo/network.hpp"
#include "test_helpers.hpp"

using namespace sevo;
using namespace test_helpers;
namespace fs = std::filesystem;

namespace {

NetworkConfig small_config(std::vector<index_t> widths, double epsilon, std::uint64_t seed) {
    NetworkConfig cfg;
    cfg.layer_widths = std::move(widths);
    cfg.topology.epsilon = epsilon;
    cfg.topology.rng_seed = seed;
    cfg.learning_rate = 0.05;
    cfg.momentum = 0.9;
    cfg.weight_decay = 0.0;
    cfg.batch_size = 4;
    cfg.epochs = 5;
    return cfg;
}

SparseLayer identity_layer(index_t n, Activation act) {
    SparseBuilder b(n, n);
    for (index_t i = 0; i < n; ++i) b.set(i, i, real(1.0));
    SparseLayer layer;
    layer.weights = builder_to_csr(b);
    layer.bias.assign(static_cast<std::size_t>(n), real(0));
    layer.weight_momentum.assign(static_cast<std::size_t>(n), real(0));
    layer.bias_momentum.assign(static_cast<std::size_t>(n), real(0));
    layer.activation = act;
    layer.refresh_pattern();
    return layer;
}

// Independent dense forward pass for the oracle comparison.
DenseMatrix dense_forward(const Network& net, const DenseMatrix& x) {
    DenseMatrix a = x;
    const auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto w = densify(layers[l].weights);
        DenseMatrix z = dense_matmul(w, a);
        for (index_t i = 0; i < z.rows(); ++i)
            for (index_t b = 0; b < z.cols(); ++b)
                z(i, b) += layers[l].bias[static_cast<std::size_t>(i)];
        if (l + 1 == layers.size()) {
            for (index_t b = 0; b < z.cols(); ++b) {
                double m = static_cast<double>(z(0, b));
                for (index_t i = 1; i < z.rows(); ++i)
                    m = std::max(m, static_cast<double>(z(i, b)));
                double sum = 0;
                for (index_t i = 0; i < z.rows(); ++i) {
                    const double e = std::exp(static_cast<double>(z(i, b)) - m);
                    z(i, b) = static_cast<real>(e);
                    sum += e;
                }
                for (index_t i = 0; i < z.rows(); ++i)
                    z(i, b) = static_cast<real>(static_cast<double>(z(i, b)) / sum);
            }
        } else if (layers[l].activation == Activation::relu) {
            for (std::size_t k = 0; k < z.size(); ++k)
                z.data()[k] = std::max(z.data()[k], real(0));
        } else {
            for (std::size_t k = 0; k < z.size(); ++k)
                z.data()[k] = real(1) / (real(1) + std::exp(-z.data()[k]));
        }
        a = std::move(z);
    }
    return a;
}

double loss_at(Network& net, const DenseMatrix& x, const std::vector<std::int32_t>& labels) {
    const DenseMatrix probs = net.forward(x, false, nullptr);
    return net.batch_loss(probs, labels);
}

} // namespace

TEST_CASE("forward: identity hidden layer passes non-negative input through") {
    NetworkConfig cfg = small_config({3, 3, 3}, 100, 1);
    std::vector<SparseLayer> layers;
    layers.push_back(identity_layer(3, Activation::relu));
    layers.push_back(identity_layer(3, Activation::softmax_output));
    Network net(cfg, std::move(layers));

    DenseMatrix x(3, 2);
    for (std::size_t k = 0; k < x.size(); ++k) x.data()[k] = real(0.25 * (1 + (int)k));
    ForwardCache cache;
    (void)net.forward(x, false, &cache);
    CHECK(cache.activations[1] == x);
}

TEST_CASE("forward: softmax of zero logits is uniform") {
    NetworkConfig cfg = small_config({2, 2}, 100, 2);
    std::vector<SparseLayer> layers;
    layers.push_back(identity_layer(2, Activation::softmax_output));
    Network net(cfg, std::move(layers));
    DenseMatrix x(2, 1); // zero input through identity weights gives logits [0, 0]
    const DenseMatrix p = net.forward(x, false, nullptr);
    CHECK(p(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("forward: softmax columns sum to one") {
    Network net(small_config({20, 12, 5}, 6, 77));
    const DenseMatrix x = random_dense(20, 9, 5);
    const DenseMatrix p = net.forward(x, false, nullptr);
    for (index_t b = 0; b < p.cols(); ++b) {
        double sum = 0;
        for (index_t i = 0; i < p.rows(); ++i) {
            sum += static_cast<double>(p(i, b));
            CHECK(p(i, b) >= real(0));
        }
        CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("forward: random 3-layer net matches densified oracle within 1e-12") {
    for (auto act : {Activation::relu, Activation::sigmoid}) {
        NetworkConfig cfg = small_config({40, 30, 20, 6}, 8, 3131);
        cfg.hidden_activation = act;
        Network net(cfg);
        const DenseMatrix x = random_dense(40, 7, 9);
        const DenseMatrix got = net.forward(x, false, nullptr);
        const DenseMatrix want = dense_forward(net, x);
        CHECK(max_rel_diff(got, want) < 1e-12);
    }
}

TEST_CASE("forward: errors on bad input") {
    Network net(small_config({4, 3}, 100, 5));
    CHECK_THROWS_AS(net.forward(random_dense(5, 2, 1), false), std::invalid_argument);
    DenseMatrix nan_x(4, 1);
    nan_x(2, 0) = std::numeric_limits<real>::quiet_NaN();
    CHECK_THROWS_AS(net.forward(nan_x, false), std::invalid_argument);
}

TEST_CASE("backward: confident correct prediction has near-zero gradients") {
    NetworkConfig cfg = small_config({2, 2}, 100, 6);
    std::vector<SparseLayer> layers;
    layers.push_back(identity_layer(2, Activation::softmax_output));
    Network net(cfg, std::move(layers));
    DenseMatrix x(2, 1);
    x(0, 0) = real(40); // logits [40, 0] -> softmax ~ [1, 0]
    ForwardCache cache;
    (void)net.forward(x, true, &cache);
    const auto grads = net.backward(cache, std::vector<std::int32_t>{0});
    for (const auto& lg : grads) {
        for (auto g : lg.weights) CHECK(std::fabs(static_cast<double>(g)) < 1e-6);
        for (auto g : lg.bias) CHECK(std::fabs(static_cast<double>(g)) < 1e-6);
    }
}

TEST_CASE("backward: label out of range throws") {
    Network net(small_config({4, 3}, 100, 7));
    const DenseMatrix x = random_dense(4, 2, 2);
    ForwardCache cache;
    (void)net.forward(x, true, &cache);
    CHECK_THROWS_AS(net.backward(cache, std::vector<std::int32_t>{0, 3}), std::out_of_range);
}

TEST_CASE("backward: gradients match central finite differences") {
    for (auto act : {Activation::relu, Activation::sigmoid}) {
        CAPTURE(static_cast<int>(act));
        NetworkConfig cfg = small_config({6, 4, 4, 3}, 100, 8); // eps=100 clips to dense
        cfg.hidden_activation = act;
        Network net(cfg);
        const DenseMatrix x = random_dense(6, 5, 21);
        const std::vector<std::int32_t> labels = {0, 2, 1, 2, 0};

        ForwardCache cache;
        (void)net.forward(x, true, &cache);
        const auto grads = net.backward(cache, labels);

        const double h = 1e-5;
        double worst = 0;
        for (std::size_t l = 0; l < net.layers().size(); ++l) {
            auto& weights = net.layer(l).weights.vals;
            for (std::size_t k = 0; k < weights.size(); ++k) {
                const real keep = weights[k];
                weights[k] = keep + static_cast<real>(h);
                const double up = loss_at(net, x, labels);
                weights[k] = keep - static_cast<real>(h);
                const double down = loss_at(net, x, labels);
                weights[k] = keep;
                const double fd = (up - down) / (2 * h);
                const double an = static_cast<double>(grads[l].weights[k]);
                worst = std::max(worst,
                                 std::fabs(fd - an) / std::max({1.0, std::fabs(fd), std::fabs(an)}));
            }
            auto& bias = net.layer(l).bias;
            for (std::size_t i = 0; i < bias.size(); ++i) {
                const real keep = bias[i];
                bias[i] = keep + static_cast<real>(h);
                const double up = loss_at(net, x, labels);
                bias[i] = keep - static_cast<real>(h);
                const double down = loss_at(net, x, labels);
                bias[i] = keep;
                const double fd = (up - down) / (2 * h);
                const double an = static_cast<double>(grads[l].bias[i]);
                worst = std::max(worst,
                                 std::fabs(fd - an) / std::max({1.0, std::fabs(fd), std::fabs(an)}));
            }
        }
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("backward + sgd_step touch only pattern positions") {
    NetworkConfig cfg = small_config({10, 8, 3}, 3, 9); // genuinely sparse
    Network net(cfg);
    const auto before0 = position_set(net.layers()[0].weights);
    const auto before1 = position_set(net.layers()[1].weights);

    const DenseMatrix x = random_dense(10, 4, 3);
    ForwardCache cache;
    (void)net.forward(x, true, &cache);
    net.sgd_step(net.backward(cache, std::vector<std::int32_t>{0, 1, 2, 0}));

    CHECK(position_set(net.layers()[0].weights) == before0);
    CHECK(position_set(net.layers()[1].weights) == before1);
}

TEST_CASE("sgd_step: plain SGD when momentum and decay are zero") {
    NetworkConfig cfg = small_config({2, 2}, 100, 10);
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;
    cfg.learning_rate = 0.1;
    std::vector<SparseLayer> layers;
    layers.push_back(identity_layer(2, Activation::softmax_output));
    Network net(cfg, std::move(layers));

    Gradients grads(1);
    grads[0].weights = {real(0.5), real(-1.0)};
    grads[0].bias = {real(0), real(0)};
    net.sgd_step(grads);
    CHECK(net.layers()[0].weights.vals[0] == real(1.0 - 0.1 * 0.5));
    CHECK(net.layers()[0].weights.vals[1] == real(1.0 + 0.1));
}

TEST_CASE("sgd_step: zero gradient leaves weights unchanged") {
    NetworkConfig cfg = small_config({2, 2}, 100, 11);
    cfg.weight_decay = 0.0;
    std::vector<SparseLayer> layers;
    layers.push_back(identity_layer(2, Activation::softmax_output));
    Network net(cfg, std::move(layers));
    Gradients grads(1);
    grads[0].weights = {real(0), real(0)};
    grads[0].bias = {real(0), real(0)};
    net.sgd_step(grads);
    CHECK(net.layers()[0].weights.vals == std::vector<real>{real(1), real(1)});
}

TEST_CASE("sgd_step: two momentum steps match the hand recurrence") {
    NetworkConfig cfg = small_config({1, 1}, 100, 12);
    cfg.momentum = 0.9;
    cfg.weight_decay = 0.0;
    cfg.learning_rate = 0.1;
    std::vector<SparseLayer> layers;
    layers.push_back(identity_layer(1, Activation::softmax_output));
    Network net(cfg, std::move(layers));

    Gradients grads(1);
    grads[0].weights = {real(0.5)};
    grads[0].bias = {real(0)};

    // v1 = -lr*g = -0.05; w1 = 1 - 0.05 = 0.95
    net.sgd_step(grads);
    CHECK(net.layers()[0].weights.vals[0] == real(1.0) - real(0.1) * real(0.5));
    // v2 = 0.9*v1 - 0.05 = -0.095; w2 = 0.95 - 0.095 = 0.855
    net.sgd_step(grads);
    const real v1 = -real(0.1) * real(0.5);
    const real w1 = real(1.0) + v1;
    const real v2 = real(0.9) * v1 - real(0.1) * real(0.5);
    CHECK(net.layers()[0].weights.vals[0] == w1 + v2);
}

TEST_CASE("sgd_step: weight decay pulls weights toward zero") {
    NetworkConfig cfg = small_config({1, 1}, 100, 13);
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.1;
    cfg.learning_rate = 0.5;
    std::vector<SparseLayer> layers;
    layers.push_back(identity_layer(1, Activation::softmax_output));
    Network net(cfg, std::move(layers));
    Gradients grads(1);
    grads[0].weights = {real(0)};
    grads[0].bias = {real(0)};
    net.sgd_step(grads);
    // w = 1 - lr*wd*1 = 0.95; bias untouched by decay
    CHECK(net.layers()[0].weights.vals[0] == real(1.0) - real(0.5) * real(0.1));
    CHECK(net.layers()[0].bias[0] == real(0));
}

TEST_CASE("evolve_layers: momentum stays aligned across evolution") {
    NetworkConfig cfg = small_config({30, 25, 4}, 5, 14);
    cfg.topology.zeta = 0.4;
    Network net(cfg);

    // Build some momentum first.
    const DenseMatrix x = random_dense(30, 6, 8);
    for (int step = 0; step < 3; ++step) {
        ForwardCache cache;
        (void)net.forward(x, true, &cache);
        net.sgd_step(net.backward(cache, std::vector<std::int32_t>{0, 1, 2, 3, 0, 1}));
    }

    std::vector<std::map<std::pair<index_t, index_t>, std::pair<real, real>>> before;
    for (const auto& layer : net.layers()) {
        std::map<std::pair<index_t, index_t>, std::pair<real, real>> m;
        const CooMatrix coo = csr_to_coo(layer.weights);
        for (std::size_t k = 0; k < coo.vals.size(); ++k)
            m[{coo.rows[k], coo.cols[k]}] = {coo.vals[k], layer.weight_momentum[k]};
        before.push_back(std::move(m));
    }

    net.evolve_layers();

    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const auto& layer = net.layers()[l];
        REQUIRE(layer.weight_momentum.size() == static_cast<std::size_t>(layer.weights.nnz()));
        const CooMatrix coo = csr_to_coo(layer.weights);
        for (std::size_t k = 0; k < coo.vals.size(); ++k) {
            const auto it = before[l].find({coo.rows[k], coo.cols[k]});
            if (it != before[l].end() && it->second.first == coo.vals[k]) {
                // survivor: value bits unchanged, momentum carried over
                CHECK(layer.weight_momentum[k] == it->second.second);
            } else {
                CHECK(layer.weight_momentum[k] == real(0));
            }
        }
    }
}

TEST_CASE("train: fixed pattern when evolution is off") {
    NetworkConfig cfg = small_config({15, 10, 3}, 4, 15);
    cfg.evolution_enabled = false;
    cfg.epochs = 4;
    Network net(cfg);
    const auto pattern0 = position_set(net.layers()[0].weights);
    const auto pattern1 = position_set(net.layers()[1].weights);

    const Dataset train = synth_hdls(24, 15, 3, 5, 1.0, 16);
    const Dataset test = synth_hdls(12, 15, 3, 5, 1.0, 17);
    (void)net.train(train, test);

    CHECK(position_set(net.layers()[0].weights) == pattern0);
    CHECK(position_set(net.layers()[1].weights) == pattern1);
}

TEST_CASE("train: zeta=0 with evolution on equals evolution off") {
    const Dataset train = synth_hdls(24, 15, 3, 5, 1.0, 18);
    const Dataset test = synth_hdls(12, 15, 3, 5, 1.0, 19);

    NetworkConfig on = small_config({15, 10, 3}, 4, 20);
    on.topology.zeta = 0.0;
    on.evolution_enabled = true;
    on.epochs = 3;
    NetworkConfig off = on;
    off.evolution_enabled = false;

    Network net_on(on), net_off(off);
    const History h_on = net_on.train(train, test);
    const History h_off = net_off.train(train, test);

    for (std::size_t l = 0; l < net_on.layers().size(); ++l) {
        CHECK(net_on.layers()[l].weights == net_off.layers()[l].weights);
        CHECK(net_on.layers()[l].bias == net_off.layers()[l].bias);
    }
    REQUIRE(h_on.size() == h_off.size());
    for (std::size_t e = 0; e < h_on.size(); ++e) {
        CHECK(h_on[e].train_loss == h_off[e].train_loss);
        CHECK(h_on[e].test_accuracy == h_off[e].test_accuracy);
    }
}

TEST_CASE("train: separable synthetic set reaches 95% within 100 epochs") {
    const Dataset full = synth_hdls(200, 1000, 2, 40, 0.5, 22);
    SplitSpec spec;
    spec.seed = 22;
    auto [train_raw, test_raw] = split(full, spec);
    auto [train, test] = normalize(train_raw, test_raw);

    NetworkConfig cfg = small_config({1000, 100, 2}, 10, 23);
    cfg.learning_rate = 0.05;
    cfg.batch_size = 8;
    cfg.epochs = 100;
    Network net(cfg);

    double best = 0;
    for (int epoch = 0; epoch < cfg.epochs && best < 0.95; ++epoch) {
        (void)net.train_epoch(train);
        best = std::max(best, net.evaluate(test));
        if (epoch + 1 < cfg.epochs) net.evolve_layers();
    }
    CHECK(best >= 0.95);
}

TEST_CASE("train: parameter count constant across epochs with evolution on") {
    NetworkConfig cfg = small_config({40, 30, 3}, 6, 24);
    cfg.topology.zeta = 0.3;
    cfg.epochs = 10;
    Network net(cfg);
    const index_t params0 = net.parameter_count();

    const Dataset train = synth_hdls(30, 40, 3, 8, 1.0, 25);
    const Dataset test = synth_hdls(15, 40, 3, 8, 1.0, 26);
    const History hist = net.train(train, test);
    CHECK(hist.size() == 10);
    for (const auto& row : hist) CHECK(row.nnz_total == hist[0].nnz_total);
    CHECK(net.parameter_count() == params0);
}

TEST_CASE("dropout: inverted scaling preserves the activation mean") {
    // One hidden unit column of 10000: weights all 1, input 1 -> activation 1.
    NetworkConfig cfg = small_config({1, 10000, 2}, 1e9, 27); // clipped to dense
    cfg.dropout_rate = 0.5;
    Network net(cfg);
    // Overwrite layer 1 with all-ones weights and zero bias.
    SparseBuilder b(10000, 1);
    for (index_t i = 0; i < 10000; ++i) b.set(i, 0, real(1.0));
    net.layer(0).weights = builder_to_csr(b);
    net.layer(0).weight_momentum.assign(10000, real(0));
    net.layer(0).bias.assign(10000, real(0));
    net.layer(0).refresh_pattern();

    DenseMatrix x(1, 1);
    x(0, 0) = real(1);
    ForwardCache cache;
    (void)net.forward(x, true, &cache);
    const DenseMatrix& hidden = cache.activations[1];
    double mean = 0;
    for (std::size_t k = 0; k < hidden.size(); ++k) mean += static_cast<double>(hidden.data()[k]);
    mean /= static_cast<double>(hidden.size());
    CHECK(std::fabs(mean - 1.0) <= 0.02);

    // Evaluation mode: no dropout, every activation is exactly 1.
    ForwardCache eval_cache;
    (void)net.forward(x, false, &eval_cache);
    for (std::size_t k = 0; k < eval_cache.activations[1].size(); ++k)
        CHECK(eval_cache.activations[1].data()[k] == real(1));
}

TEST_CASE("checkpoint: save/load round trip is bit-exact") {
    TempFileGuard guard("model_roundtrip.sevo");
    NetworkConfig cfg = small_config({12, 9, 4}, 5, 28);
    Network net(cfg);
    // Nudge the weights so the file is not just the initializer output.
    const DenseMatrix x = random_dense(12, 3, 4);
    ForwardCache cache;
    (void)net.forward(x, true, &cache);
    net.sgd_step(net.backward(cache, std::vector<std::int32_t>{0, 1, 2}));

    save_checkpoint(net, guard.path);
    const Network back = load_checkpoint(guard.path);
    CHECK(back.config().layer_widths == net.config().layer_widths);
    REQUIRE(back.layers().size() == net.layers().size());
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        CHECK(back.layers()[l].weights == net.layers()[l].weights);
        CHECK(back.layers()[l].bias == net.layers()[l].bias);
        CHECK(back.layers()[l].activation == net.layers()[l].activation);
    }
}

TEST_CASE("checkpoint: corrupt files are rejected") {
    TempFileGuard guard("model_corrupt.sevo");
    {
        std::ofstream os(guard.path, std::ios::binary);
        os << "BOGUS data that is not a checkpoint";
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(guard.path), doctest::Contains("magic"),
                         std::runtime_error);

    NetworkConfig cfg = small_config({5, 4}, 100, 29);
    Network net(cfg);
    save_checkpoint(net, guard.path);
    fs::resize_file(guard.path, fs::file_size(guard.path) - 16);
    CHECK_THROWS_WITH_AS(load_checkpoint(guard.path), doctest::Contains("truncated"),
                         std::runtime_error);
}

TEST_CASE("config validation names the failing field") {
    NetworkConfig cfg = small_config({4, 2}, 10, 30);
    cfg.batch_size = 0;
    CHECK_THROWS_WITH_AS(Network{cfg}, doctest::Contains("batch_size"), std::invalid_argument);
    cfg = small_config({4}, 10, 31);
    CHECK_THROWS_AS(Network{cfg}, std::invalid_argument);
}
