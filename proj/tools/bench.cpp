// Compares the OpenMP kernels against their serial references on the
// workloads that dominate a run: complex matrix products (propagation),
// batched network passes (SAC updates) and a full pulse gradient.

#include <chrono>
#include <cstdio>
#include <omp.h>

#include "czopt/circuit.hpp"
#include "czopt/gradopt.hpp"
#include "czopt/mlp.hpp"
#include "czopt/numerics.hpp"
#include "czopt/rng.hpp"

using namespace czopt;

namespace {

double now() { return omp_get_wtime(); }

template <typename F>
double time_loop(int reps, F&& f) {
    f();  // warm up
    const double t0 = now();
    for (int r = 0; r < reps; ++r) f();
    return (now() - t0) / reps;
}

ComplexMatrix random_matrix(std::size_t n, Rng& rng) {
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            m(i, j) = cplx(rng.uniform() - 0.5, rng.uniform() - 0.5);
    return m;
}

}  // namespace

int main() {
    Rng rng(7);
    std::printf("threads available: %d\n\n", omp_get_max_threads());
    std::printf("%-34s %12s %12s %8s\n", "workload", "serial (ms)", "openmp (ms)", "speedup");

    for (std::size_t n : {27, 64, 125, 256}) {
        const ComplexMatrix a = random_matrix(n, rng);
        const ComplexMatrix b = random_matrix(n, rng);
        const int reps = n <= 64 ? 200 : 20;
        const double ts = time_loop(reps, [&] { volatile auto c = matmul_serial(a, b); });
        const double tp = time_loop(reps, [&] { volatile auto c = matmul(a, b); });
        std::printf("%-28s %zux%zu %12.3f %12.3f %7.2fx\n", "complex matmul", n, n, ts * 1e3,
                    tp * 1e3, ts / tp);
    }

    {
        // one critic-scale batched forward/backward pass
        const int batch = 256;
        Mlp net = Mlp::make({38, 256, 256, 1}, rng);
        RealMatrix x(batch, 38);
        for (double& v : x.a) v = rng.uniform() - 0.5;
        RealMatrix dy(batch, 1);
        for (double& v : dy.a) v = rng.uniform() - 0.5;
        const double tp = time_loop(50, [&] {
            Mlp::Forward cache;
            net.forward(x, cache);
            Mlp::Grads g = net.zero_grads();
            net.backward(cache, dy, g);
        });
        omp_set_num_threads(1);
        const double ts = time_loop(50, [&] {
            Mlp::Forward cache;
            net.forward(x, cache);
            Mlp::Grads g = net.zero_grads();
            net.backward(cache, dy, g);
        });
        omp_set_num_threads(omp_get_num_procs());
        std::printf("%-34s %12.3f %12.3f %7.2fx\n", "mlp fwd+bwd 38-256-256-1 b=256", ts * 1e3,
                    tp * 1e3, ts / tp);
    }

    {
        const CircuitParams p = CircuitParams::defaults(3);
        PulseSchedule s = PulseSchedule::shape(20.0, 1.0, 4.2, 6.38);
        Rng r2(3);
        const PulseSchedule sched = naive_ansatz(AnsatzKind::Random, s, 6.38, r2);
        const double tp = time_loop(10, [&] { volatile auto g = infidelity_and_gradient(p, sched); });
        omp_set_num_threads(1);
        const double ts = time_loop(10, [&] { volatile auto g = infidelity_and_gradient(p, sched); });
        omp_set_num_threads(omp_get_num_procs());
        std::printf("%-34s %12.3f %12.3f %7.2fx\n", "pulse gradient 20 steps d=3", ts * 1e3,
                    tp * 1e3, ts / tp);
    }
    return 0;
}
