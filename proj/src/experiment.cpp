#include "sevo/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "sevo/kernels.hpp"
#include "sevo/topology.hpp"

namespace sevo {

namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::string fmt_double(double v) {
    char buf[48];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return {buf, res.ptr};
}

Dataset load_source(const ExperimentConfig& cfg) {
    switch (cfg.source) {
        case DataSource::csv:
            if (!cfg.label_name.empty()) return load_csv_by_label_name(cfg.csv_path, cfg.label_name);
            return load_csv(cfg.csv_path, cfg.label_column, cfg.csv_has_header);
        case DataSource::binary:
            return load_binary(cfg.binary_path);
        case DataSource::synthetic:
            return synth_hdls(cfg.synth.samples, cfg.synth.features, cfg.synth.classes,
                              cfg.synth.informative, cfg.synth.noise, cfg.seed);
    }
    throw std::logic_error("load_source: bad source");
}

std::uint64_t read_vm_hwm_bytes() {
    std::ifstream is("/proc/self/status");
    std::string line;
    while (std::getline(is, line)) {
        if (line.rfind("VmHWM:", 0) == 0) {
            std::uint64_t kb = 0;
            std::sscanf(line.c_str(), "VmHWM: %llu", reinterpret_cast<unsigned long long*>(&kb));
            return kb * 1024;
        }
    }
    return 0;
}

} // namespace

void ExperimentConfig::validate() const {
    if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
    if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
    if (parallel_trials < 1) throw std::invalid_argument("config: parallel_trials must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("config: train_fraction must be in (0, 1)");
    if (out_dir.empty()) throw std::invalid_argument("config: out_dir must be set");
    if (source == DataSource::csv && !fs::exists(csv_path))
        throw std::invalid_argument("config: csv path does not exist: " + csv_path);
    if (source == DataSource::binary && !fs::exists(binary_path))
        throw std::invalid_argument("config: data path does not exist: " + binary_path);
    if (hidden_widths.empty())
        throw std::invalid_argument("config: hidden_widths must not be empty");
    for (auto w : hidden_widths)
        if (w < 1) throw std::invalid_argument("config: hidden widths must be >= 1");
}

void write_history_csv(const std::string& path, std::span<const TrialResult> trials) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << "trial,epoch,train_loss,test_accuracy,epoch_seconds,nnz_total\n";
    for (const auto& t : trials) {
        for (const auto& row : t.history) {
            os << t.trial << ',' << row.epoch << ',' << fmt_double(row.train_loss) << ','
               << fmt_double(row.test_accuracy) << ',' << fmt_double(row.epoch_seconds) << ','
               << row.nnz_total << '\n';
        }
    }
}

std::string history_csv_without_timing(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::ostringstream out;
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
        if (header) {
            out << line << '\n';
            header = false;
            continue;
        }
        // Blank field 5 (epoch_seconds).
        std::size_t start = 0;
        int field = 0;
        std::string rebuilt;
        while (true) {
            const std::size_t comma = line.find(',', start);
            std::string cell =
                line.substr(start, comma == std::string::npos ? comma : comma - start);
            if (field == 4) cell = "-";
            if (field > 0) rebuilt += ',';
            rebuilt += cell;
            if (comma == std::string::npos) break;
            start = comma + 1;
            ++field;
        }
        out << rebuilt << '\n';
    }
    return out.str();
}

TrainOutcome run_train(const ExperimentConfig& cfg) {
    cfg.validate();
    set_num_threads(cfg.threads);
    fs::create_directories(cfg.out_dir);

    Dataset full = load_source(cfg);
    SplitSpec split_spec;
    split_spec.train_fraction = cfg.train_fraction;
    split_spec.stratified = cfg.stratified;
    split_spec.seed = cfg.seed;
    auto [train_raw, test_raw] = split(full, split_spec);
    auto [train_set, test_set] = normalize(train_raw, test_raw, cfg.scaling);

    NetworkConfig base = cfg.net;
    base.layer_widths.clear();
    base.layer_widths.push_back(train_set.n_features);
    for (auto h : cfg.hidden_widths) base.layer_widths.push_back(h);
    base.layer_widths.push_back(train_set.n_classes);

    TrainOutcome outcome;
    outcome.trials.resize(static_cast<std::size_t>(cfg.trials));

    std::mutex best_mutex;
    std::unique_ptr<Network> best_net;
    int best_trial = -1;
    double best_trial_best_acc = -1.0;

    auto run_one = [&](int t) {
        NetworkConfig nc = base;
        nc.topology.rng_seed = splitmix64(cfg.seed ^ splitmix64(0x747269ULL + t));
        Network net(nc);
        History hist = net.train(train_set, test_set);
        TrialResult res;
        res.trial = t;
        res.best_accuracy = 0.0;
        for (const auto& row : hist) res.best_accuracy = std::max(res.best_accuracy, row.test_accuracy);
        res.final_accuracy = hist.empty() ? 0.0 : hist.back().test_accuracy;
        res.history = std::move(hist);

        std::lock_guard<std::mutex> lock(best_mutex);
        const bool better = res.best_accuracy > best_trial_best_acc ||
                            (res.best_accuracy == best_trial_best_acc &&
                             (best_trial < 0 || t < best_trial));
        if (better) {
            best_trial_best_acc = res.best_accuracy;
            best_trial = t;
            best_net = std::make_unique<Network>(std::move(net));
        }
        outcome.trials[static_cast<std::size_t>(t)] = std::move(res);
    };

    if (cfg.parallel_trials <= 1) {
        for (int t = 0; t < cfg.trials; ++t) run_one(t);
    } else {
        std::atomic<int> next{0};
        const int workers = std::min(cfg.parallel_trials, cfg.trials);
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (int t = next.fetch_add(1); t < cfg.trials; t = next.fetch_add(1)) run_one(t);
            });
        }
        for (auto& th : pool) th.join();
    }

    outcome.best_trial = best_trial;
    double mean = 0;
    for (const auto& t : outcome.trials) mean += t.best_accuracy;
    mean /= static_cast<double>(cfg.trials);
    double var = 0;
    for (const auto& t : outcome.trials) {
        const double d = t.best_accuracy - mean;
        var += d * d;
    }
    var /= static_cast<double>(cfg.trials);
    outcome.mean_best_accuracy = mean;
    outcome.std_best_accuracy = std::sqrt(var);

    outcome.history_csv = (fs::path(cfg.out_dir) / "history.csv").string();
    outcome.confusion_csv = (fs::path(cfg.out_dir) / "confusion.csv").string();
    outcome.summary_txt = (fs::path(cfg.out_dir) / "summary.txt").string();
    outcome.model_file = (fs::path(cfg.out_dir) / "model.sevo").string();
    outcome.test_set_file = (fs::path(cfg.out_dir) / "test_set.sevd").string();

    write_history_csv(outcome.history_csv, outcome.trials);
    save_binary(test_set, outcome.test_set_file);
    save_checkpoint(*best_net, outcome.model_file);

    ConfusionMatrix cm(test_set.n_classes);
    best_net->evaluate(test_set, &cm);
    {
        std::ofstream os(outcome.confusion_csv);
        cm.write_csv(os, test_set.class_names);
    }
    {
        std::ofstream os(outcome.summary_txt);
        os << "trials=" << cfg.trials << '\n'
           << "best_trial=" << outcome.best_trial << '\n'
           << "mean_best_accuracy=" << fmt_double(outcome.mean_best_accuracy) << '\n'
           << "std_best_accuracy=" << fmt_double(outcome.std_best_accuracy) << '\n'
           << "best_trial_final_accuracy="
           << fmt_double(outcome.trials[static_cast<std::size_t>(best_trial)].final_accuracy)
           << '\n';
    }
    return outcome;
}

std::vector<BenchRow> run_bench_evolution(std::span<const index_t> sizes, double epsilon,
                                          double zeta, int repeats, std::uint64_t seed,
                                          const std::string& out_dir) {
    if (repeats < 1) throw std::invalid_argument("bench: repeats must be >= 1");
    for (auto s : sizes)
        if (s < 100) throw std::invalid_argument("bench: sizes must be >= 100");
    set_num_threads(1);
    fs::create_directories(out_dir);

    std::vector<BenchRow> rows;
    for (auto size : sizes) {
        TopologyParams params;
        params.epsilon = epsilon;
        params.zeta = zeta;
        params.rng_seed = splitmix64(seed ^ static_cast<std::uint64_t>(size));
        const CsrMatrix w = er_init(size, size, params, real(0.1));

        // Correctness gate before any timing: both implementations must agree
        // on the prune set and, with the shared candidate stream, bit-equal
        // output matrices.
        {
            auto r1 = make_evolve_rng(params.rng_seed);
            auto r2 = make_evolve_rng(params.rng_seed);
            std::vector<std::size_t> p1, p2;
            auto [m1, rep1] = evolve_v1(w, params, r1, &p1);
            auto [m2, rep2] = evolve_v2(w, params, r2, &p2);
            if (p1 != p2)
                throw std::logic_error("bench: prune sets differ between implementations");
            if (!(m1 == m2))
                throw std::logic_error("bench: evolved matrices differ between implementations");
        }

        std::vector<double> t1(static_cast<std::size_t>(repeats));
        std::vector<double> t2(static_cast<std::size_t>(repeats));
        // Untimed warmup pass.
        {
            auto r = make_evolve_rng(splitmix64(params.rng_seed ^ 0xdeadULL));
            (void)evolve_v1(w, params, r);
            r = make_evolve_rng(splitmix64(params.rng_seed ^ 0xdeadULL));
            (void)evolve_v2(w, params, r);
        }
        for (int rep = 0; rep < repeats; ++rep) {
            const std::uint64_t rep_seed = splitmix64(params.rng_seed ^ (0xB0B0ULL + rep));
            auto r = make_evolve_rng(rep_seed);
            t1[static_cast<std::size_t>(rep)] = evolve_v1(w, params, r).second.elapsed;
            r = make_evolve_rng(rep_seed);
            t2[static_cast<std::size_t>(rep)] = evolve_v2(w, params, r).second.elapsed;
        }
        auto mean_std = [](const std::vector<double>& v) {
            double mean = 0;
            for (auto x : v) mean += x;
            mean /= static_cast<double>(v.size());
            double var = 0;
            for (auto x : v) var += (x - mean) * (x - mean);
            var /= static_cast<double>(v.size());
            return std::pair<double, double>(mean, std::sqrt(var));
        };
        const auto [m1, s1] = mean_std(t1);
        const auto [m2, s2] = mean_std(t2);
        rows.push_back({size, "v1", m1, s1});
        rows.push_back({size, "v2", m2, s2});
    }

    std::ofstream os(fs::path(out_dir) / "bench.csv");
    os << "size,impl,mean_s,std_s\n";
    for (const auto& r : rows)
        os << r.size << ',' << r.impl << ',' << fmt_double(r.mean_s) << ',' << fmt_double(r.std_s)
           << '\n';
    return rows;
}

std::string MemoryEstimate::breakdown() const {
    std::ostringstream os;
    for (const auto& [label, bytes] : parts) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%-28s %10.1f MB\n", label.c_str(), bytes / 1.0e6);
        os << buf;
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-28s %10.1f MB\n", "total", total_bytes / 1.0e6);
    os << buf;
    return os.str();
}

MemoryEstimate estimate_memory(std::span<const index_t> widths, double epsilon, index_t batch,
                               index_t samples) {
    MemoryEstimate est;
    const double R = sizeof(real);
    const double I = sizeof(index_t);

    double weights = 0, grads = 0, evolve_peak = 0;
    for (std::size_t l = 1; l < widths.size(); ++l) {
        const double e = static_cast<double>(
            expected_nnz(std::span<const index_t>(widths.data() + l - 1, 2), epsilon));
        // CSR arrays + momentum + cached COO row pattern.
        weights += e * (I + R + R + I) + static_cast<double>(widths[l] + 1) * I;
        weights += static_cast<double>(widths[l]) * R * 2; // bias + bias momentum
        grads += e * R + static_cast<double>(widths[l]) * R;
        evolve_peak = std::max(evolve_peak, e * (2 * I + R) * 2);
    }
    est.parts.push_back({"weights+momentum+pattern", weights});
    est.parts.push_back({"gradient buffers", grads});

    double act = 0;
    for (auto w : widths) act += static_cast<double>(w) * static_cast<double>(batch) * R * 3;
    est.parts.push_back({"activations (fwd+bwd)", act});
    est.parts.push_back({"evolution transient", evolve_peak});
    est.parts.push_back(
        {"dataset", static_cast<double>(samples) * static_cast<double>(widths[0]) * R +
                        static_cast<double>(samples) * 4});

    for (const auto& [label, bytes] : est.parts) est.total_bytes += bytes;
    return est;
}

ExtremeReport run_extreme(const ExtremeConfig& cfg) {
    if (cfg.widths.size() < 2) throw std::invalid_argument("extreme: need >= 2 widths");
    if (cfg.samples < 1) throw std::invalid_argument("extreme: samples must be >= 1");
    set_num_threads(1);
    fs::create_directories(cfg.out_dir);

    ExtremeReport report;
    report.widths = cfg.widths;
    for (auto w : cfg.widths) report.total_neurons += w;
    report.expected_connections = expected_nnz(cfg.widths, cfg.epsilon);
    report.reference_connections = cfg.reference_connections;
    report.estimate = estimate_memory(cfg.widths, cfg.epsilon, cfg.batch_size, cfg.samples);

    if (report.estimate.total_bytes > cfg.mem_limit_gb * 1.0e9) {
        throw std::runtime_error("extreme: estimated memory " +
                                 std::to_string(report.estimate.total_bytes / 1.0e9) +
                                 " GB exceeds limit " + std::to_string(cfg.mem_limit_gb) +
                                 " GB\n" + report.estimate.breakdown());
    }

    NetworkConfig nc;
    nc.layer_widths = cfg.widths;
    nc.topology.epsilon = cfg.epsilon;
    nc.topology.zeta = cfg.zeta;
    nc.topology.rng_seed = cfg.seed;
    nc.learning_rate = cfg.learning_rate;
    nc.batch_size = cfg.batch_size;
    nc.epochs = cfg.epochs;
    nc.dropout_rate = cfg.dropout;
    nc.evolution_enabled = true;
    nc.evolution_impl = EvolutionImpl::v2;

    Dataset data;
    try {
        data = synth_hdls(cfg.samples, cfg.widths.front(), static_cast<int>(cfg.widths.back()),
                          std::min<index_t>(cfg.widths.front(), 64), 1.0, cfg.seed);
        Network net(nc);
        report.realized_connections = net.connection_count();

        for (int e = 0; e < cfg.epochs; ++e) {
            const auto t0 = std::chrono::steady_clock::now();
            const double loss = net.train_epoch(data);
            if (e + 1 < cfg.epochs) net.evolve_layers();
            report.epoch_seconds.push_back(
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
            report.epoch_loss.push_back(loss);
        }
    } catch (const std::bad_alloc&) {
        throw std::runtime_error("extreme: allocation failed; analytic accounting:\n" +
                                 report.estimate.breakdown());
    }
    report.vm_hwm_bytes = read_vm_hwm_bytes();

    report.report_file = (fs::path(cfg.out_dir) / "extreme_report.txt").string();
    std::ofstream os(report.report_file);
    os << "widths=";
    for (std::size_t i = 0; i < cfg.widths.size(); ++i)
        os << (i ? "," : "") << cfg.widths[i];
    os << '\n';
    os << "total_neurons=" << report.total_neurons << '\n';
    os << "realized_connections=" << report.realized_connections << '\n';
    os << "expected_connections=" << report.expected_connections << '\n';
    if (report.reference_connections > 0)
        os << "reference_connections=" << report.reference_connections << '\n';
    os << "estimated_bytes=" << static_cast<std::uint64_t>(report.estimate.total_bytes) << '\n';
    if (report.vm_hwm_bytes > 0) os << "vm_hwm_bytes=" << report.vm_hwm_bytes << '\n';
    for (std::size_t e = 0; e < report.epoch_seconds.size(); ++e) {
        os << "epoch_" << e << "_seconds=" << fmt_double(report.epoch_seconds[e]) << '\n';
        os << "epoch_" << e << "_loss=" << fmt_double(report.epoch_loss[e]) << '\n';
    }
    os << "memory_breakdown:\n" << report.estimate.breakdown();
    return report;
}

EvalOutcome run_eval(const std::string& model_path, const std::string& data_path,
                     const std::string& out_dir) {
    fs::create_directories(out_dir);
    Network net = load_checkpoint(model_path);
    Dataset data;
    if (data_path.size() > 4 && data_path.substr(data_path.size() - 4) == ".csv")
        data = load_csv(data_path);
    else
        data = load_binary(data_path);
    if (data.n_features != net.config().layer_widths.front())
        throw std::invalid_argument(
            "eval: dataset has " + std::to_string(data.n_features) +
            " features but the model expects " +
            std::to_string(net.config().layer_widths.front()));

    EvalOutcome out;
    ConfusionMatrix cm(static_cast<int>(net.config().layer_widths.back()));
    out.accuracy = net.evaluate(data, &cm);
    out.samples = data.n_samples;
    out.confusion_csv = (fs::path(out_dir) / "confusion.csv").string();
    std::ofstream os(out.confusion_csv);
    cm.write_csv(os, data.class_names);
    return out;
}

} // namespace sevo
