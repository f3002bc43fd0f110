#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sevo/experiment.hpp"
#include "sevo/kernels.hpp"

namespace {

struct TrainArgs {
    sevo::ExperimentConfig cfg;
    std::vector<sevo::index_t> hidden = {100};
    std::string source = "synth";
    std::string scaling = "minmax";
    std::string impl = "v2";
    std::string activation = "relu";
    bool no_evolution = false;
};

void apply_train_args(TrainArgs& a) {
    if (a.source == "csv") a.cfg.source = sevo::DataSource::csv;
    else if (a.source == "binary") a.cfg.source = sevo::DataSource::binary;
    else if (a.source == "synth") a.cfg.source = sevo::DataSource::synthetic;
    else throw CLI::ValidationError("--source", "must be csv, binary or synth");

    if (a.scaling == "minmax") a.cfg.scaling = sevo::ScalingKind::minmax;
    else if (a.scaling == "zscore") a.cfg.scaling = sevo::ScalingKind::zscore;
    else if (a.scaling == "none") a.cfg.scaling = sevo::ScalingKind::none;
    else throw CLI::ValidationError("--normalize", "must be minmax, zscore or none");

    if (a.impl == "v1") a.cfg.net.evolution_impl = sevo::EvolutionImpl::v1;
    else if (a.impl == "v2") a.cfg.net.evolution_impl = sevo::EvolutionImpl::v2;
    else throw CLI::ValidationError("--impl", "must be v1 or v2");

    if (a.activation == "relu") a.cfg.net.hidden_activation = sevo::Activation::relu;
    else if (a.activation == "sigmoid") a.cfg.net.hidden_activation = sevo::Activation::sigmoid;
    else throw CLI::ValidationError("--activation", "must be relu or sigmoid");

    a.cfg.hidden_widths = a.hidden;
    a.cfg.net.evolution_enabled = !a.no_evolution;
    a.cfg.net.topology.rng_seed = a.cfg.seed;
}

void add_train_options(CLI::App* cmd, TrainArgs& a) {
    cmd->add_option("--source", a.source, "data source: csv, binary or synth")
        ->capture_default_str();
    cmd->add_option("--csv", a.cfg.csv_path, "csv dataset path");
    cmd->add_option("--label-col", a.cfg.label_column,
                    "0-based label column index (-1 = last)")
        ->capture_default_str();
    cmd->add_option("--label-name", a.cfg.label_name,
                    "label column selected by header name (overrides --label-col)");
    cmd->add_flag("!--no-header", a.cfg.csv_has_header, "csv file has no header row");
    cmd->add_option("--data", a.cfg.binary_path, "binary dataset path (.sevd)");
    cmd->add_option("--synth-samples", a.cfg.synth.samples)->capture_default_str();
    cmd->add_option("--synth-features", a.cfg.synth.features)->capture_default_str();
    cmd->add_option("--synth-classes", a.cfg.synth.classes)->capture_default_str();
    cmd->add_option("--synth-informative", a.cfg.synth.informative)->capture_default_str();
    cmd->add_option("--synth-noise", a.cfg.synth.noise)->capture_default_str();
    cmd->add_option("--train-fraction", a.cfg.train_fraction)->capture_default_str();
    cmd->add_flag("!--no-stratified", a.cfg.stratified, "disable stratified splitting");
    cmd->add_option("--normalize", a.scaling, "feature scaling: minmax, zscore or none")
        ->capture_default_str();
    cmd->add_option("--hidden", a.hidden, "hidden layer widths")->capture_default_str();
    cmd->add_option("--epsilon", a.cfg.net.topology.epsilon, "sparsity control")
        ->capture_default_str();
    cmd->add_option("--zeta", a.cfg.net.topology.zeta, "rewiring rate")->capture_default_str();
    cmd->add_option("--regrow-sigma", a.cfg.net.topology.regrow_sigma)->capture_default_str();
    cmd->add_option("--lr", a.cfg.net.learning_rate, "learning rate")->capture_default_str();
    cmd->add_option("--momentum", a.cfg.net.momentum)->capture_default_str();
    cmd->add_option("--weight-decay", a.cfg.net.weight_decay)->capture_default_str();
    cmd->add_option("--batch", a.cfg.net.batch_size, "minibatch size")->capture_default_str();
    cmd->add_option("--epochs", a.cfg.net.epochs)->capture_default_str();
    cmd->add_option("--dropout", a.cfg.net.dropout_rate, "hidden-layer dropout rate")
        ->capture_default_str();
    cmd->add_flag("--no-evolution", a.no_evolution,
                  "freeze the sparsity pattern (fixed-probability baseline)");
    cmd->add_option("--impl", a.impl, "evolution implementation: v1 or v2")
        ->capture_default_str();
    cmd->add_option("--activation", a.activation, "hidden activation: relu or sigmoid")
        ->capture_default_str();
    cmd->add_option("--trials", a.cfg.trials)->capture_default_str();
    cmd->add_option("--seed", a.cfg.seed)->capture_default_str();
    cmd->add_option("--out", a.cfg.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--threads", a.cfg.threads, "kernel threads")->capture_default_str();
    cmd->add_option("--parallel-trials", a.cfg.parallel_trials,
                    "run this many trials concurrently")
        ->capture_default_str();
}

int cmd_train(const TrainArgs& args_in) {
    TrainArgs args = args_in;
    apply_train_args(args);
    const auto outcome = sevo::run_train(args.cfg);
    std::printf("trials=%d best_trial=%d mean_best_accuracy=%.4f std=%.4f\n",
                static_cast<int>(outcome.trials.size()), outcome.best_trial,
                outcome.mean_best_accuracy, outcome.std_best_accuracy);
    std::printf("wrote %s\n", outcome.history_csv.c_str());
    std::printf("wrote %s\n", outcome.confusion_csv.c_str());
    std::printf("wrote %s\n", outcome.summary_txt.c_str());
    std::printf("wrote %s\n", outcome.model_file.c_str());
    std::printf("wrote %s\n", outcome.test_set_file.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Truly sparse evolutionary MLP training engine"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "key=value config file; subcommand options live under a section "
                   "such as [train]. Command-line flags override the file.");

    // train
    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train a sparse MLP over one or more trials");
    add_train_options(train, train_args);

    // bench-evolution
    std::vector<sevo::index_t> bench_sizes = {500, 2000, 8000, 15000};
    double bench_eps = 10.0, bench_zeta = 0.3;
    int bench_repeats = 7;
    std::uint64_t bench_seed = 42;
    std::string bench_out = "run";
    CLI::App* bench = app.add_subcommand(
        "bench-evolution", "time both prune-regrow implementations on square matrices");
    bench->add_option("--sizes", bench_sizes, "square matrix sizes")->capture_default_str();
    bench->add_option("--epsilon", bench_eps)->capture_default_str();
    bench->add_option("--zeta", bench_zeta)->capture_default_str();
    bench->add_option("--repeats", bench_repeats)->capture_default_str();
    bench->add_option("--seed", bench_seed)->capture_default_str();
    bench->add_option("--out", bench_out)->capture_default_str();

    // extreme
    sevo::ExtremeConfig ext;
    ext.widths = {54675, 500000, 500000, 18};
    CLI::App* extreme = app.add_subcommand(
        "extreme", "build and train a very large sparse MLP, reporting feasibility numbers");
    extreme->add_option("--widths", ext.widths, "layer widths, input..output")
        ->capture_default_str();
    extreme->add_option("--epsilon", ext.epsilon)->capture_default_str();
    extreme->add_option("--zeta", ext.zeta)->capture_default_str();
    extreme->add_option("--epochs", ext.epochs)->capture_default_str();
    extreme->add_option("--samples", ext.samples, "synthetic sample count")->capture_default_str();
    extreme->add_option("--batch", ext.batch_size)->capture_default_str();
    extreme->add_option("--lr", ext.learning_rate)->capture_default_str();
    extreme->add_option("--dropout", ext.dropout)->capture_default_str();
    extreme->add_option("--seed", ext.seed)->capture_default_str();
    extreme->add_option("--out", ext.out_dir)->capture_default_str();
    extreme->add_option("--mem-limit-gb", ext.mem_limit_gb)->capture_default_str();
    extreme->add_option("--reference-connections", ext.reference_connections,
                        "external connection count to print alongside")
        ->capture_default_str();

    // eval
    std::string eval_model, eval_data, eval_out = "run";
    CLI::App* eval = app.add_subcommand("eval", "score a checkpoint against a dataset");
    eval->add_option("--model", eval_model, "model checkpoint (.sevo)")->required();
    eval->add_option("--data", eval_data, "dataset (.sevd or .csv)")->required();
    eval->add_option("--out", eval_out)->capture_default_str();

    // synth
    sevo::SynthSpec synth_spec;
    std::uint64_t synth_seed = 42;
    std::string synth_out = "synth.sevd";
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--samples", synth_spec.samples)->capture_default_str();
    synth->add_option("--features", synth_spec.features)->capture_default_str();
    synth->add_option("--classes", synth_spec.classes)->capture_default_str();
    synth->add_option("--informative", synth_spec.informative)->capture_default_str();
    synth->add_option("--noise", synth_spec.noise)->capture_default_str();
    synth->add_option("--seed", synth_seed)->capture_default_str();
    synth->add_option("--out", synth_out, "output path (.sevd or .csv)")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) return cmd_train(train_args);
        if (*bench) {
            const auto rows = sevo::run_bench_evolution(bench_sizes, bench_eps, bench_zeta,
                                                        bench_repeats, bench_seed, bench_out);
            std::printf("%8s  %4s  %12s  %12s\n", "size", "impl", "mean_s", "std_s");
            for (const auto& r : rows)
                std::printf("%8lld  %4s  %12.6f  %12.6f\n", static_cast<long long>(r.size),
                            r.impl.c_str(), r.mean_s, r.std_s);
            std::printf("wrote %s/bench.csv\n", bench_out.c_str());
            return 0;
        }
        if (*extreme) {
            const auto rep = sevo::run_extreme(ext);
            std::printf("total_neurons=%lld\n", static_cast<long long>(rep.total_neurons));
            std::printf("realized_connections=%lld\n",
                        static_cast<long long>(rep.realized_connections));
            std::printf("expected_connections=%lld\n",
                        static_cast<long long>(rep.expected_connections));
            if (rep.reference_connections > 0)
                std::printf("reference_connections=%lld\n",
                            static_cast<long long>(rep.reference_connections));
            std::printf("estimated_memory_mb=%.1f\n", rep.estimate.total_bytes / 1.0e6);
            for (std::size_t e = 0; e < rep.epoch_seconds.size(); ++e)
                std::printf("epoch %zu: %.2f s, loss %.4f\n", e, rep.epoch_seconds[e],
                            rep.epoch_loss[e]);
            std::printf("wrote %s\n", rep.report_file.c_str());
            return 0;
        }
        if (*eval) {
            const auto out = sevo::run_eval(eval_model, eval_data, eval_out);
            std::printf("samples=%lld accuracy=%.6f\n", static_cast<long long>(out.samples),
                        out.accuracy);
            std::printf("wrote %s\n", out.confusion_csv.c_str());
            return 0;
        }
        if (*synth) {
            const auto ds = sevo::synth_hdls(synth_spec.samples, synth_spec.features,
                                             synth_spec.classes, synth_spec.informative,
                                             synth_spec.noise, synth_seed);
            if (synth_out.size() > 4 && synth_out.substr(synth_out.size() - 4) == ".csv")
                sevo::save_csv(ds, synth_out);
            else
                sevo::save_binary(ds, synth_out);
            std::printf("wrote %s (%lld samples, %lld features, %d classes)\n", synth_out.c_str(),
                        static_cast<long long>(ds.n_samples),
                        static_cast<long long>(ds.n_features), ds.n_classes);
            return 0;
        }
    } catch (const std::exception& e) {
        std::string msg = e.what();
        for (auto& ch : msg)
            if (ch == '\n') ch = ' ';
        std::fprintf(stderr, "error: %s\n", msg.c_str());
        return 1;
    }
    return 0;
}
