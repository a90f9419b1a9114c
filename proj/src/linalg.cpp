#include "ssmtkrd/linalg.hpp"

namespace ssmtkrd {

double dot(const float* a, const float* b, int n) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += double(a[i]) * double(b[i]);
    return acc;
}

void matvec(const float* w, const float* x, float* y, int rows, int cols) {
    for (int r = 0; r < rows; ++r) y[r] = float(dot(w + size_t(r) * cols, x, cols));
}

void project_tokens(const float* x, float* y, const float* w, const float* bias, int n, int rows,
                    int cols) {
#pragma omp parallel for
    for (int t = 0; t < n; ++t) {
        const float* xi = x + size_t(t) * cols;
        float* yi = y + size_t(t) * rows;
        for (int r = 0; r < rows; ++r) {
            double acc = bias ? double(bias[r]) : 0.0;
            acc += dot(w + size_t(r) * cols, xi, cols);
            yi[r] = float(acc);
        }
    }
}

}  // namespace ssmtkrd
