// Times the OpenMP kernels against their serial references on synthetic
// workloads. Not registered with ctest; run manually:
//   ./build/bench_kernels [users] [items] [density]

#include <chrono>
#include <cstdio>
#include <string>

#include "fairrec/bias.hpp"
#include "fairrec/kernels.hpp"
#include "fairrec/synth.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void print_row(const char* kernel, double serial_ms, double parallel_ms) {
    std::printf("%-24s %10.1f ms %10.1f ms %8.2fx\n", kernel, serial_ms, parallel_ms,
                parallel_ms > 0 ? serial_ms / parallel_ms : 0.0);
}

}  // namespace

int main(int argc, char** argv) {
    std::size_t users = argc > 1 ? std::stoul(argv[1]) : 1500;
    std::size_t items = argc > 2 ? std::stoul(argv[2]) : 400;
    double density = argc > 3 ? std::stod(argv[3]) : 0.15;

    fairrec::GenerativeConfig config;
    config.users = users;
    config.items = items;
    config.density = density;
    config.seed = 7;
    fairrec::SyntheticDataset synth = fairrec::generate_dataset(config);
    const fairrec::RatingsDataset& ds = synth.ratings;

    fairrec::SparseRows rows;
    rows.offsets = ds.user_offsets();
    rows.cols = ds.user_items();
    rows.values = ds.user_values();

#ifdef _OPENMP
    std::printf("threads: %d (set OMP_NUM_THREADS to vary)\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (compiled without OpenMP)\n");
#endif
    std::printf("workload: %zu users x %zu items, %zu ratings\n\n", users, items,
                ds.rating_count());
    std::printf("%-24s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

    {
        fairrec::NeighborParams params;
        auto t0 = Clock::now();
        auto serial = fairrec::neighbor_lists_serial(rows, params);
        double serial_ms = ms_since(t0);
        t0 = Clock::now();
        auto parallel = fairrec::neighbor_lists(rows, params);
        print_row("neighbor_lists", serial_ms, ms_since(t0));
        if (serial.size() != parallel.size()) std::printf("  MISMATCH in list count!\n");
    }
    {
        const std::size_t factors = 32;
        std::vector<double> item_factors(items * factors, 0.05);
        std::vector<double> serial_out, parallel_out;
        auto t0 = Clock::now();
        fairrec::als_half_step_serial(rows, item_factors, factors, 0.1, serial_out);
        double serial_ms = ms_since(t0);
        t0 = Clock::now();
        fairrec::als_half_step(rows, item_factors, factors, 0.1, parallel_out);
        print_row("als_half_step", serial_ms, ms_since(t0));
        if (serial_out != parallel_out) std::printf("  MISMATCH in factors!\n");
    }
    {
        auto t0 = Clock::now();
        auto serial = fairrec::compute_user_bias_serial(ds);
        double serial_ms = ms_since(t0);
        t0 = Clock::now();
        auto parallel = fairrec::compute_user_bias(ds);
        print_row("compute_user_bias", serial_ms, ms_since(t0));
        if (serial.size() != parallel.size()) std::printf("  MISMATCH in score count!\n");
    }
    return 0;
}
