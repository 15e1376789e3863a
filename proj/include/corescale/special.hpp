#ifndef CORESCALE_SPECIAL_HPP
#define CORESCALE_SPECIAL_HPP

#include <cmath>
#include <stdexcept>

namespace corescale {

// e_k(x) = sum_{i>=k} x^i/i! = e^x - sum_{i<k} x^i/i!
//
// For x below k the subtraction cancels catastrophically, so the tail is
// summed directly; above k the partial sum is a small fraction of e^x and
// the subtraction is safe.
inline double trunc_exp(int k, double x) {
    if (k < 0) throw std::domain_error("trunc_exp: k < 0");
    if (x < 0.0) throw std::domain_error("trunc_exp: x < 0");
    if (x > 700.0) throw std::overflow_error("trunc_exp: x > 700 overflows");
    if (k == 0) return std::exp(x);
    if (x < static_cast<double>(k)) {
        // term-by-term: x^k/k! * (1 + x/(k+1) + x^2/((k+1)(k+2)) + ...)
        double term = 1.0;
        for (int i = 1; i <= k; ++i) term *= x / i;
        double sum = 0.0;
        for (int i = 0; i < 400; ++i) {
            sum += term;
            term *= x / (k + 1 + i);
            if (term < sum * 1e-18) break;
        }
        return sum;
    }
    double partial = 0.0, term = 1.0;
    for (int i = 0; i < k; ++i) {
        partial += term;
        term *= x / (i + 1);
    }
    return std::exp(x) - partial;
}

// log e_k(x), stable for large x where e_k(x) itself would overflow
inline double log_trunc_exp(int k, double x) {
    if (x <= 700.0) {
        const double v = trunc_exp(k, x);
        if (v > 0.0 && std::isfinite(v)) return std::log(v);
    }
    // e_k(x) = e^x (1 - P(Poisson(x) < k)); the subtracted mass is negligible
    // for the large x reached here (x >> k)
    double logsum = -INFINITY;
    double logterm = 0.0;  // log(x^0/0!)
    for (int i = 0; i < k; ++i) {
        logsum = (logsum == -INFINITY) ? logterm
                                       : std::max(logsum, logterm) +
                                             std::log1p(std::exp(-std::fabs(logsum - logterm)));
        logterm += std::log(x) - std::log(i + 1.0);
    }
    if (k == 0) return x;
    const double shifted = logsum - x;  // log of the subtracted mass relative to e^x
    return x + std::log1p(-std::exp(shifted));
}

inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) * 0.39894228040143267793994605993438;
}

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.70710678118654752440084436210485);
}

inline double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

inline double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

}  // namespace corescale

#endif
