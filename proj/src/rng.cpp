#include "ssmtkrd/rng.hpp"

#include <cmath>

namespace ssmtkrd {

// Range-reduce to x = k*ln2 + r with |r| <= ln2/2, sum the Taylor series
// for e^r in a fixed order, then scale by 2^k exactly. Every step is plain
// IEEE double arithmetic, so the result is identical on any conforming
// platform; agreement with std::exp is within ~1 ulp on [0, 8].
double det_exp(double x) {
    if (x < 0.0 || x > 8.0) return std::exp(x);
    constexpr double kLn2 = 0.6931471805599453;
    const int k = int(x / kLn2 + 0.5);
    const double r = x - double(k) * kLn2;
    // Horner over 13 terms: enough for |r| <= 0.347 at double precision.
    double acc = 1.0;
    for (int i = 13; i >= 1; --i) acc = 1.0 + acc * r / double(i);
    return std::ldexp(acc, k);
}

}  // namespace ssmtkrd
