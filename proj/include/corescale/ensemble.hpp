#ifndef CORESCALE_ENSEMBLE_HPP
#define CORESCALE_ENSEMBLE_HPP

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "corescale/degree_spec.hpp"
#include "corescale/linalg.hpp"
#include "corescale/special.hpp"

namespace corescale {

struct EnsembleParams {
    DegreeSpec spec;
    long n;
    double rho;
    long m;         // floor(n * rho)
    double mu;      // V(1)
    double gamma;   // mu / rho

    EnsembleParams(DegreeSpec s, long n_, double rho_, double epsilon = 0.01)
        : spec(std::move(s)), n(n_), rho(rho_) {
        if (n < 1) throw std::invalid_argument("EnsembleParams: n < 1");
        if (rho < epsilon || rho > 1.0 / epsilon)
            throw std::invalid_argument("EnsembleParams: rho outside [epsilon, 1/epsilon]");
        m = static_cast<long>(std::floor(n * rho));
        if (m < 1) throw std::invalid_argument("EnsembleParams: m < 1");
        mu = spec.mu();
        gamma = mu / rho;
    }
};

// slack(zeta, rho) = -log(1-zeta) - V(zeta)/rho.
//
// Along the fluid trajectory u1 >= 0 iff slack >= 0 (Lemma B.1 form), so the
// chain survives at rho iff the slack stays positive on (0,1). The threshold
// is where an interior minimum of the slack first touches zero:
//   rho_c = sup_{zeta in (0,1)} V(zeta) / (-log(1-zeta)).
inline double threshold_slack(const DegreeSpec& spec, double rho, double zeta) {
    return -std::log1p(-zeta) - spec.V(zeta) / rho;
}

struct CriticalData {
    double rho_c = 0.0;                  // unconstrained critical value
    bool transition_in_unit = true;      // false when rho_c > 1 (no transition for rho <= 1)
    std::vector<double> Z;               // tangency locations, strictly increasing
    std::vector<bool> assumption_ok;     // V''(zeta)/rho_c < (1-zeta)^{-2} per zeta in Z
};

namespace detail {

// golden-section minimization on [a,b] for a unimodal-on-bracket function
inline double golden_min(const std::function<double(double)>& f, double a, double b,
                         double tol = 1e-12) {
    const double gr = 0.61803398874989484820;
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace detail

// Locates rho_c and the tangency set Z.
//
// The ratio r(zeta) = V(zeta)/(-log(1-zeta)) vanishes at both endpoints and
// attains its supremum at interior local maxima; rho_c is the largest such
// value and Z collects every zeta whose slack at rho_c is zero within a
// scale-aware tolerance. Each member must satisfy the curvature condition
// V''(zeta)/rho_c < (1-zeta)^{-2}, otherwise the tangency is degenerate.
inline CriticalData find_rho_c(const DegreeSpec& spec, int grid_points = 10000) {
    const auto ratio = [&](double z) { return spec.V(z) / (-std::log1p(-z)); };
    const double lo = 1e-9, hi = 1.0 - 1e-9;

    std::vector<double> zs(grid_points + 1), fs(grid_points + 1);
    for (int i = 0; i <= grid_points; ++i) {
        zs[i] = lo + (hi - lo) * i / grid_points;
        fs[i] = ratio(zs[i]);
    }
    std::vector<double> maxima;
    for (int i = 1; i < grid_points; ++i) {
        if (fs[i] >= fs[i - 1] && fs[i] >= fs[i + 1] && (fs[i] > fs[i - 1] || fs[i] > fs[i + 1])) {
            const double z = detail::golden_min([&](double x) { return -ratio(x); },
                                                zs[i - 1], zs[i + 1]);
            if (maxima.empty() || z - maxima.back() > 1e-7) maxima.push_back(z);
        }
    }
    if (maxima.empty()) throw std::runtime_error("find_rho_c: no interior maximum found");

    CriticalData out;
    for (double z : maxima) out.rho_c = std::max(out.rho_c, ratio(z));
    out.transition_in_unit = (out.rho_c <= 1.0);

    // membership: maxima whose slack at rho_c vanishes within a scale-aware tolerance
    for (double z : maxima) {
        const double slack = threshold_slack(spec, out.rho_c, z);
        if (std::fabs(slack) <= 1e-9 * std::max(1.0, spec.V(z))) out.Z.push_back(z);
    }
    if (out.Z.empty()) throw std::runtime_error("find_rho_c: empty tangency set");

    for (double z : out.Z) {
        const bool ok = spec.V2(z) / out.rho_c < 1.0 / ((1.0 - z) * (1.0 - z));
        out.assumption_ok.push_back(ok);
        if (!ok)
            throw std::runtime_error(
                "find_rho_c: degenerate tangency at zeta=" + std::to_string(z) +
                " (V''(zeta)/rho_c >= (1-zeta)^{-2})");
    }
    return out;
}

struct InitialMoments {
    Vec u_rho;   // means per unit n of (omega_1, omega_2)
    Mat Q_rho;   // 2x2 covariance scale
};

// Closed-form initial mean/covariance of (omega_1, omega_2); the general
// (mu, rho) overload exists so limits like gamma -> 0 can be probed directly.
inline InitialMoments initial_moments(double mu, double rho) {
    const double g = mu / rho;
    const double eg = std::exp(-g);
    const double e2g = eg * eg;
    InitialMoments im;
    im.u_rho = {mu * eg, rho * (1.0 - eg) - mu * eg};
    im.Q_rho = Mat(2, 2);
    im.Q_rho(0, 0) = mu * e2g * (std::exp(g) - 1.0 + g - g * g);
    im.Q_rho(0, 1) = im.Q_rho(1, 0) = -mu * e2g * (std::exp(g) - 1.0 - g * g);
    im.Q_rho(1, 1) =
        rho * e2g * ((std::exp(g) - 1.0) + g * (std::exp(g) - 2.0) - g * g * (1.0 + g));
    return im;
}

inline InitialMoments initial_moments(const EnsembleParams& params) {
    return initial_moments(params.mu, params.rho);
}

// d u_rho / d rho, analytic
inline Vec initial_mean_drho(double mu, double rho) {
    const double g = mu / rho;
    const double eg = std::exp(-g);
    return {g * g * eg, 1.0 - eg - g * eg - g * g * eg};
}

}  // namespace corescale

#endif
