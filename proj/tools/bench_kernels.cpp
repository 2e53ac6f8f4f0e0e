// Compares the serial reference kernels against the OpenMP ones and times
// a full scoring pass at paper scale (T=40, d=500).
#include "vmr/graphs.hpp"
#include "vmr/model.hpp"
#include "vmr/rand.hpp"

#include <chrono>
#include <cstdio>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace vmr;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng) {
    Matrix m(rows, cols);
    for (size_t i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
}

template <typename F>
double time_best_of(int reps, F&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        auto t0 = clock_type::now();
        fn();
        best = std::min(best, seconds_since(t0));
    }
    return best;
}

void bench_matmul(int n, std::mt19937_64& rng) {
    const Matrix a = random_matrix(n, n, rng);
    const Matrix b = random_matrix(n, n, rng);
    Matrix out_serial, out_parallel;
    const double ts = time_best_of(3, [&] { kernels::serial::matmul(out_serial, a, b); });
    const double tp = time_best_of(3, [&] { kernels::matmul(out_parallel, a, b); });
    const double gflops = 2.0 * n * n * (double)n * 1e-9;
    std::printf("matmul %4dx%-4d serial %8.2f ms (%5.2f GF/s)  omp %8.2f ms (%5.2f GF/s)"
                "  speedup %.2fx  identical %s\n",
                n, n, ts * 1e3, gflops / ts, tp * 1e3, gflops / tp, ts / tp,
                out_serial.equals(out_parallel) ? "yes" : "NO");
}

void bench_tanh(int n, std::mt19937_64& rng) {
    const Matrix a = random_matrix(n, n, rng);
    Matrix out_serial, out_parallel;
    const double ts = time_best_of(3, [&] { kernels::serial::tanh_map(out_serial, a); });
    const double tp = time_best_of(3, [&] { kernels::tanh_map(out_parallel, a); });
    std::printf("tanh   %4dx%-4d serial %8.2f ms                omp %8.2f ms"
                "                speedup %.2fx  identical %s\n",
                n, n, ts * 1e3, tp * 1e3, ts / tp,
                out_serial.equals(out_parallel) ? "yes" : "NO");
}

void bench_forward_pair(std::mt19937_64& rng) {
    ModelConfig cfg;
    cfg.T = 40;
    cfg.feature_dim = 500;
    cfg.hidden_dim = 500;
    ParamStore params;
    init_model_params(cfg, params, rng);
    const AdjacencySet adj = build_adjacency_set(cfg.T, cfg.ks);
    const Matrix q = random_matrix(cfg.T, cfg.feature_dim, rng);
    const Matrix p = random_matrix(cfg.T, cfg.feature_dim, rng);
    const double t = time_best_of(3, [&] { forward_pair(q, p, params, cfg, adj); });
    std::printf("forward_pair at paper scale (T=40, d=500): %.2f ms\n", t * 1e3);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP\n");
#endif
    std::mt19937_64 rng(42);
    for (int n : {64, 128, 256, 512, 768}) bench_matmul(n, rng);
    for (int n : {256, 1024, 2048}) bench_tanh(n, rng);
    bench_forward_pair(rng);
    return 0;
}
