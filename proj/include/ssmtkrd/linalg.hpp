#pragma once

#include <span>

namespace ssmtkrd {

// y[r] = sum_c W[r*cols + c] * x[c], accumulated in double.
void matvec(const float* w, const float* x, float* y, int rows, int cols);

// Row-wise projection of n tokens: Y[t] = W X[t] (+ bias when given).
// Parallel over tokens; each output element is written by exactly one
// thread, so results are identical for any thread count.
void project_tokens(const float* x, float* y, const float* w, const float* bias,
                    int n, int rows, int cols);

double dot(const float* a, const float* b, int n);

}  // namespace ssmtkrd
