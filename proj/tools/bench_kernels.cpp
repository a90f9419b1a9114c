// Compares the OpenMP kernels against their serial reference twins: wall
// time and max abs difference (which must be exactly zero; the parallel
// loops only split independent outputs).

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "ssmtkrd/harness.hpp"
#include "ssmtkrd/linalg.hpp"
#include "ssmtkrd/metrics.hpp"
#include "ssmtkrd/reduction.hpp"
#include "ssmtkrd/reference.hpp"
#include "ssmtkrd/rng.hpp"
#include "ssmtkrd/ssm.hpp"

using namespace ssmtkrd;

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

template <typename F>
double time_best_of(F&& f, int reps) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const double t0 = now_ms();
        f();
        best = std::min(best, now_ms() - t0);
    }
    return best;
}

float max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
    float m = 0.0f;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

void fill(Xoshiro256pp& rng, std::vector<float>& v, float lo, float hi) {
    for (auto& x : v) x = rng.uniform(lo, hi);
}

}  // namespace

int main() {
    apply_thread_cap_from_env();
    std::printf("threads: %d\n\n", omp_get_max_threads());
    std::printf("%-22s %10s %10s %8s %12s\n", "kernel", "serial ms", "omp ms", "speedup",
                "max |diff|");

    Xoshiro256pp rng(2024);
    const int reps = 5;

    {  // token projection (the in/out matmuls)
        const int n = 2048, rows = 256, cols = 128;
        std::vector<float> x(size_t(n) * cols), w(size_t(rows) * cols), bias(rows);
        fill(rng, x, -1.f, 1.f);
        fill(rng, w, -0.1f, 0.1f);
        fill(rng, bias, -0.1f, 0.1f);
        std::vector<float> y_par(size_t(n) * rows), y_ser(size_t(n) * rows);
        const double tp = time_best_of(
            [&] { project_tokens(x.data(), y_par.data(), w.data(), bias.data(), n, rows, cols); },
            reps);
        const double ts = time_best_of(
            [&] {
                ref::project_tokens_serial(x.data(), y_ser.data(), w.data(), bias.data(), n, rows,
                                           cols);
            },
            reps);
        std::printf("%-22s %10.2f %10.2f %8.2f %12g\n", "project_tokens", ts, tp, ts / tp,
                    max_abs_diff(y_par, y_ser));
    }

    {  // selective scan recurrence
        const ModelConfig cfg{1, 64, 192, 16, 1024, 9};
        const Model model = generate_model(cfg);
        HiddenStates x = HiddenStates::zeros(768, cfg.inner_dim);
        fill(rng, x.y, -1.f, 1.f);
        const ScanParams p = compute_scan_params(x, model.layers[0], cfg);
        HiddenStates y_par, y_ser;
        const double tp =
            time_best_of([&] { y_par = scan_recurrence(x, model.layers[0].a_diag, p); }, reps);
        const double ts = time_best_of(
            [&] { y_ser = ref::scan_recurrence_serial(x, model.layers[0].a_diag, p); }, reps);
        std::printf("%-22s %10.2f %10.2f %8.2f %12g\n", "scan_recurrence", ts, tp, ts / tp,
                    max_abs_diff(y_par.y, y_ser.y));
    }

    {  // importance metric
        HiddenStates y = HiddenStates::zeros(4096, 256);
        fill(rng, y.y, -2.f, 2.f);
        ImportanceScores s_par, s_ser;
        const double tp = time_best_of([&] { s_par = importance(y, MetricKind::Clip); }, reps);
        const double ts =
            time_best_of([&] { s_ser = ref::importance_serial(y, MetricKind::Clip); }, reps);
        std::printf("%-22s %10.2f %10.2f %8.2f %12g\n", "importance", ts, tp, ts / tp,
                    max_abs_diff(s_par.s, s_ser.s));
    }

    {  // connection search
        const int n = 1024, dim = 128;
        HiddenStates y = HiddenStates::zeros(n, dim);
        fill(rng, y.y, -1.f, 1.f);
        const ImportanceScores s = importance(y, MetricKind::Clip);
        const TokenClassification cls = classify(s);
        std::vector<Connection> c_par, c_ser;
        const double tp = time_best_of([&] { c_par = build_connections(y, cls); }, reps);
        const double ts = time_best_of(
            [&] { c_ser = ref::build_connections_serial(y.y, n, dim, cls); }, reps);
        float diff = 0.0f;
        for (size_t i = 0; i < c_par.size(); ++i) {
            diff = std::max(diff, std::abs(c_par[i].similarity - c_ser[i].similarity));
            if (c_par[i].b_index != c_ser[i].b_index) diff = 1.0f;
        }
        std::printf("%-22s %10.2f %10.2f %8.2f %12g\n", "build_connections", ts, tp, ts / tp,
                    diff);
    }

    return 0;
}
