// Microbenchmark comparing the serial reference kernels against the
// OpenMP-parallel ones across thread counts: sparse*dense product, its
// transpose form, and the per-connection gradient kernel.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sevo/kernels.hpp"
#include "sevo/topology.hpp"

using namespace sevo;

namespace {

double time_call(const std::function<void()>& fn, int repeats) {
    double best = 1e100;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (s < best) best = s;
    }
    return best;
}

DenseMatrix random_dense(index_t rows, index_t cols, std::uint64_t seed) {
    DenseMatrix m(rows, cols);
    std::mt19937_64 rng(seed);
    std::normal_distribution<real> d(0, 1);
    for (std::size_t k = 0; k < m.size(); ++k) m.data()[k] = d(rng);
    return m;
}

bool nearly_equal(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (std::size_t k = 0; k < a.size(); ++k)
        if (a.data()[k] != b.data()[k]) return false;
    return true;
}

} // namespace

int main(int argc, char** argv) {
    index_t size = 8000;
    index_t batch = 128;
    int repeats = 5;
    if (argc > 1) size = std::stoll(argv[1]);
    if (argc > 2) batch = std::stoll(argv[2]);
    if (argc > 3) repeats = std::stoi(argv[3]);

    TopologyParams params;
    params.epsilon = 10.0;
    params.rng_seed = 7;
    const CsrMatrix w = er_init(size, size, params, real(0.1));
    const DenseMatrix x = random_dense(size, batch, 11);
    const DenseMatrix d = random_dense(size, batch, 13);
    const CooMatrix pattern = csr_to_coo(w);

    std::printf("matrix %lldx%lld, nnz=%lld, batch=%lld, best of %d\n",
                static_cast<long long>(size), static_cast<long long>(size),
                static_cast<long long>(w.nnz()), static_cast<long long>(batch), repeats);

    const DenseMatrix y_ref = ref::spmm(w, x);
    const DenseMatrix yt_ref = ref::spmm_transpose(w, d);
    const auto g_ref = ref::sparse_gradient(pattern.rows, pattern.cols, d, x);

    const double t_spmm_ref = time_call([&] { (void)ref::spmm(w, x); }, repeats);
    const double t_spmmt_ref = time_call([&] { (void)ref::spmm_transpose(w, d); }, repeats);
    const double t_grad_ref =
        time_call([&] { (void)ref::sparse_gradient(pattern.rows, pattern.cols, d, x); }, repeats);

    std::printf("\n%-18s %10s %12s %12s %10s\n", "kernel", "threads", "serial_ms", "omp_ms",
                "speedup");

    int max_threads = 4;
#ifdef _OPENMP
    max_threads = omp_get_max_threads();
#endif
    for (int threads = 1; threads <= max_threads; threads *= 2) {
        set_num_threads(threads);

        const DenseMatrix y = spmm(w, x);
        const DenseMatrix yt = spmm_transpose(w, d);
        const auto g = sparse_gradient(pattern.rows, pattern.cols, d, x);
        if (!nearly_equal(y, y_ref) || !nearly_equal(yt, yt_ref) || g != g_ref) {
            std::fprintf(stderr, "kernel mismatch against serial reference at %d threads\n",
                         threads);
            return 1;
        }

        const double t_spmm = time_call([&] { (void)spmm(w, x); }, repeats);
        const double t_spmmt = time_call([&] { (void)spmm_transpose(w, d); }, repeats);
        const double t_grad = time_call(
            [&] { (void)sparse_gradient(pattern.rows, pattern.cols, d, x); }, repeats);

        std::printf("%-18s %10d %12.3f %12.3f %9.2fx\n", "spmm", threads, t_spmm_ref * 1e3,
                    t_spmm * 1e3, t_spmm_ref / t_spmm);
        std::printf("%-18s %10d %12.3f %12.3f %9.2fx\n", "spmm_transpose", threads,
                    t_spmmt_ref * 1e3, t_spmmt * 1e3, t_spmmt_ref / t_spmmt);
        std::printf("%-18s %10d %12.3f %12.3f %9.2fx\n", "sparse_gradient", threads,
                    t_grad_ref * 1e3, t_grad * 1e3, t_grad_ref / t_grad);
    }
    return 0;
}
