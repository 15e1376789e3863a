#ifndef CORESCALE_KERNEL_HPP
#define CORESCALE_KERNEL_HPP

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "corescale/linalg.hpp"
#include "corescale/special.hpp"

namespace corescale {

// Rescaled chain state: u[i] = density of c-nodes in degree class i+1
// (class K collects degrees >= K), v[j-3] = density of v-nodes of degree j.
struct StateDensity {
    int K;
    int L;
    Vec u;  // size K
    Vec v;  // size L-2, indexed by degree j = 3..L

    StateDensity(int K_, int L_) : K(K_), L(L_), u(K_, 0.0), v(L_ - 2, 0.0) {}

    double vdeg(int j) const { return v[j - 3]; }
    double& vdeg(int j) { return v[j - 3]; }

    double edge_mass() const {  // d(v) = sum_j j v_j
        double d = 0.0;
        for (int j = 3; j <= L; ++j) d += j * v[j - 3];
        return d;
    }

    double c_edge_mass() const {  // sum_i i u_i
        double s = 0.0;
        for (int i = 1; i <= K; ++i) s += i * u[i - 1];
        return s;
    }

    // membership in H(eps): nonnegative coordinates, u_K >= eps,
    // sum_j v_j <= 1, d(v) - sum_i i u_i >= eps
    bool in_domain(double eps) const {
        for (double x : u)
            if (x < 0.0) return false;
        double vsum = 0.0;
        for (double x : v) {
            if (x < 0.0) return false;
            vsum += x;
        }
        if (u[K - 1] < eps) return false;
        if (vsum > 1.0) return false;
        return edge_mass() - c_edge_mass() >= eps;
    }

    int dim() const { return K + L - 2; }

    Vec flat() const {
        Vec x(u);
        x.insert(x.end(), v.begin(), v.end());
        return x;
    }

    static StateDensity from_flat(int K, int L, const Vec& x) {
        StateDensity s(K, L);
        for (int i = 0; i < K; ++i) s.u[i] = x[i];
        for (int j = 0; j < L - 2; ++j) s.v[j] = x[K + j];
        return s;
    }
};

// One peeling increment: dz = (d omega_1..d omega_K, d tau_3..d tau_L), with
// exactly one d tau_ell = -1 and socket counts q_0..q_K recoverable from dz.
struct Increment {
    int K;
    int L;
    int ell;             // degree of the removed v-node
    std::vector<int> q;  // size K+1: q_0 >= 1, sum q_i = ell

    std::vector<int> dz() const {
        std::vector<int> d(K + L - 2, 0);
        // d omega_i = q_i - q_{i-1} for i < K, d omega_K = -q_{K-1}
        for (int i = 1; i < K; ++i) d[i - 1] = q[i] - q[i - 1];
        d[K - 1] = -q[K - 1];
        d[K + ell - 3] = -1;
        return d;
    }
};

// All increments with removed degree ell: compositions q_0 + ... + q_K = ell
// with q_0 >= 1. Enumeration order is lexicographic in (q_0,...,q_K).
inline void enumerate_increments(int K, int ell, std::vector<Increment>& out) {
    std::vector<int> q(K + 1, 0);
    std::function<void(int, int)> rec = [&](int idx, int rem) {
        if (idx == K) {
            q[K] = rem;
            out.push_back({K, 0, ell, q});
            return;
        }
        const int start = (idx == 0) ? 1 : 0;
        for (int val = start; val <= rem; ++val) {
            q[idx] = val;
            rec(idx + 1, rem - val);
        }
        q[idx] = 0;
    };
    rec(0, ell);
}

inline std::vector<Increment> enumerate_increments(int K, int L) {
    std::vector<Increment> out;
    for (int ell = 3; ell <= L; ++ell) enumerate_increments(K, ell, out);
    for (auto& inc : out) inc.L = L;
    return out;
}

// f(lambda) = lambda e_{K-1}(lambda)/e_K(lambda), extended by f(0) = K;
// strictly increasing from K to infinity.
inline double lambda_ratio_f(int K, double lam) {
    if (lam <= 0.0) return static_cast<double>(K);
    // f = lam (1 + lam^{K-1} / ((K-1)! e_K(lam)))
    double t;
    if (lam > 650.0) {
        t = std::exp((K - 1) * std::log(lam) - log_factorial(K - 1) - log_trunc_exp(K, lam));
    } else {
        t = std::pow(lam, K - 1) / (factorial(K - 1) * trunc_exp(K, lam));
    }
    return lam * (1.0 + t);
}

inline double lambda_ratio_fprime(int K, double lam) {
    if (lam <= 0.0) lam = 1e-12;
    if (lam > 650.0) return 1.0;  // f(lam) ~ lam there
    const double eK = trunc_exp(K, lam);
    const double eK1 = trunc_exp(K - 1, lam);
    const double eK2 = trunc_exp(K - 2, lam);
    return ((eK1 + lam * eK2) * eK - lam * eK1 * eK1) / (eK * eK);
}

// Solves f(lambda) = rhs by safeguarded Newton with a bisection bracket.
inline double solve_lambda(int K, double rhs) {
    if (rhs < K) throw std::domain_error("solve_lambda: rhs below K");
    if (rhs == static_cast<double>(K)) return 0.0;
    double lo = 0.0, hi = rhs + K;
    double lam = std::max(rhs - K, 0.5 * rhs);
    for (int it = 0; it < 200; ++it) {
        const double f = lambda_ratio_f(K, lam);
        if (std::fabs(f - rhs) <= 1e-12 * rhs) return lam;
        if (f < rhs) lo = lam; else hi = lam;
        const double fp = lambda_ratio_fprime(K, lam);
        double next = lam - (f - rhs) / fp;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        lam = next;
    }
    throw std::runtime_error("solve_lambda: no convergence after 200 iterations");
}

inline double solve_lambda(const StateDensity& x) {
    const double d = x.edge_mass();
    double s = 0.0;
    for (int i = 1; i < x.K; ++i) s += i * x.u[i - 1];
    return solve_lambda(x.K, (d - s) / x.u[x.K - 1]);
}

// Socket-class probabilities p_0..p_K of Proposition 5.2:
//   p_i = (i+1) x_{i+1} / d(v)                      for i <= K-2
//   p_{K-1} = x_K lambda^K / ((K-1)! e_K(lambda) d(v))   (degree exactly K)
//   p_K = x_K lambda / d(v)                              (degree > K)
// The lambda equation forces sum_i p_i = 1.
inline Vec socket_probs(const StateDensity& x, double* lambda_out = nullptr) {
    const int K = x.K;
    const double d = x.edge_mass();
    const double lam = solve_lambda(x);
    if (lambda_out) *lambda_out = lam;
    Vec p(K + 1, 0.0);
    for (int i = 0; i <= K - 2; ++i) p[i] = (i + 1) * x.u[i] / d;
    p[K - 1] = x.u[K - 1] * std::pow(lam, K) / (factorial(K - 1) * trunc_exp(K, lam) * d);
    p[K] = x.u[K - 1] * lam / d;
    return p;
}

// R(xi) = sum_j s_j xi^{j-1} with s_j = j v_j / d(v); R'(1), R''(1) are the
// first two factorial moments of the size-biased removed degree.
struct SizeBias {
    Vec s;        // s_3..s_L, indexed j-3
    double Rp1;   // sum (j-1) s_j
    double Rpp1;  // sum (j-1)(j-2) s_j
};

inline SizeBias size_bias(const StateDensity& x) {
    SizeBias sb;
    const double d = x.edge_mass();
    sb.s.resize(x.L - 2);
    sb.Rp1 = sb.Rpp1 = 0.0;
    for (int j = 3; j <= x.L; ++j) {
        const double sj = j * x.vdeg(j) / d;
        sb.s[j - 3] = sj;
        sb.Rp1 += (j - 1) * sj;
        sb.Rpp1 += (j - 1) * (j - 2) * sj;
    }
    return sb;
}

// W(dz | x), Eq. (51): choose ell with prob ell v_ell/d(v), then multinomial
// (ell-1; p_0..p_K) over (q_0 - 1, q_1, ..., q_K).
inline double kernel_prob(const StateDensity& x, const Increment& inc) {
    const int K = x.K;
    if (inc.ell < 3 || inc.ell > x.L) return 0.0;
    if (inc.q.size() != static_cast<std::size_t>(K + 1) || inc.q[0] < 1) return 0.0;
    int total = 0;
    for (int qi : inc.q) {
        if (qi < 0) return 0.0;
        total += qi;
    }
    if (total != inc.ell) return 0.0;

    const double d = x.edge_mass();
    const double sel = inc.ell * x.vdeg(inc.ell) / d;
    if (sel == 0.0) return 0.0;
    const Vec p = socket_probs(x);

    double logmult = log_factorial(inc.ell - 1) - log_factorial(inc.q[0] - 1);
    for (int i = 1; i <= K; ++i) logmult -= log_factorial(inc.q[i]);
    double prob = sel * std::exp(logmult);
    prob *= std::pow(p[0], inc.q[0] - 1);
    for (int i = 1; i <= K; ++i) prob *= std::pow(p[i], inc.q[i]);
    return prob;
}

// Drift F(x) = E[dz], Eq. (60):
//   F_{omega_i} = R'(1)(p_i - p_{i-1}) - 1_{i=1},  i < K
//   F_{omega_K} = -R'(1) p_{K-1}
//   F_{tau_j}   = -s_j
inline Vec drift(const StateDensity& x) {
    const int K = x.K;
    const Vec p = socket_probs(x);
    const SizeBias sb = size_bias(x);
    Vec F(x.dim(), 0.0);
    for (int i = 1; i < K; ++i) F[i - 1] = sb.Rp1 * (p[i] - p[i - 1]) - (i == 1 ? 1.0 : 0.0);
    F[K - 1] = -sb.Rp1 * p[K - 1];
    for (int j = 3; j <= x.L; ++j) F[K + j - 3] = -sb.s[j - 3];
    return F;
}

// Covariance of dz, Eq. (61) specialized through the two-stage multinomial
// law. With c_i = p_i 1_{i != K} - p_{i-1} (the mean socket effect on
// omega_i) and B = R''(1) - R'(1)^2:
//   Cov(dw_i, dw_i) = R'(1)(p_i 1_{i != K} + p_{i-1}) + B c_i^2
//   Cov(dw_i, dw_j) = -R'(1) p_i 1_{j=i+1} + B c_i c_j          (i < j)
//   Cov(dw_i, dt_l) = s_l (l - 1 - R'(1)) c_i
//   Cov(dt_l, dt_k) = -s_l s_k + s_k 1_{l=k}
//
// The sign of the R'(1) p_i 1_{j=i+1} term is fixed by the multinomial
// structure (adjacent classes share the q_i count with opposite signs); the
// enumeration and sampling tests pin it down.
inline Mat covariance(const StateDensity& x) {
    const int K = x.K;
    const int D = x.dim();
    const Vec p = socket_probs(x);
    const SizeBias sb = size_bias(x);
    const double B = sb.Rpp1 - sb.Rp1 * sb.Rp1;

    Vec c(K + 1, 0.0);  // 1-indexed by omega class
    for (int i = 1; i <= K; ++i) c[i] = (i != K ? p[i] : 0.0) - p[i - 1];

    Mat G(D, D);
    for (int i = 1; i <= K; ++i) {
        G(i - 1, i - 1) = sb.Rp1 * ((i != K ? p[i] : 0.0) + p[i - 1]) + B * c[i] * c[i];
        for (int j = i + 1; j <= K; ++j) {
            double g = B * c[i] * c[j];
            if (j == i + 1) g -= sb.Rp1 * p[i];
            G(i - 1, j - 1) = G(j - 1, i - 1) = g;
        }
    }
    for (int i = 1; i <= K; ++i)
        for (int l = 3; l <= x.L; ++l) {
            const double g = sb.s[l - 3] * (l - 1 - sb.Rp1) * c[i];
            G(i - 1, K + l - 3) = G(K + l - 3, i - 1) = g;
        }
    for (int l = 3; l <= x.L; ++l)
        for (int k = l; k <= x.L; ++k) {
            double g = -sb.s[l - 3] * sb.s[k - 3];
            if (l == k) g += sb.s[l - 3];
            G(K + l - 3, K + k - 3) = G(K + k - 3, K + l - 3) = g;
        }
    return G;
}

// Central finite-difference Jacobian of the drift. Steps follow
// h_i = max(|x_i|, 1) eps^{1/3}; when a stencil point would leave the
// (closure of the) evaluation domain, both points are shifted inward and
// `projected` is flagged.
struct JacobianResult {
    Mat A;
    bool projected = false;
};

inline JacobianResult jacobian(const StateDensity& x, double eps_floor = 1e-8) {
    const int D = x.dim();
    const double cbrt_eps = std::cbrt(2.220446049250313e-16);
    JacobianResult out;
    out.A = Mat(D, D);
    const Vec base = x.flat();
    for (int c = 0; c < D; ++c) {
        const double h = std::max(std::fabs(base[c]), 1.0) * cbrt_eps;
        Vec xp = base, xm = base;
        xp[c] += h;
        xm[c] -= h;
        // keep the u_K coordinate and the lambda equation's numerator workable
        if (c == x.K - 1 && xm[c] < eps_floor) {
            const double shift = eps_floor - xm[c];
            xm[c] += shift;
            xp[c] += shift;
            out.projected = true;
        }
        const Vec Fp = drift(StateDensity::from_flat(x.K, x.L, xp));
        const Vec Fm = drift(StateDensity::from_flat(x.K, x.L, xm));
        for (int r = 0; r < D; ++r) out.A(r, c) = (Fp[r] - Fm[r]) / (xp[c] - xm[c]);
    }
    return out;
}

// d lambda / d x_i by implicit differentiation of the lambda equation,
// used as an oracle against the finite-difference Jacobian.
inline Vec lambda_gradient(const StateDensity& x) {
    const int K = x.K;
    const double d = x.edge_mass();
    double s = 0.0;
    for (int i = 1; i < K; ++i) s += i * x.u[i - 1];
    const double xK = x.u[K - 1];
    const double rhs = (d - s) / xK;
    const double lam = solve_lambda(K, rhs);
    const double fp = lambda_ratio_fprime(K, lam);
    Vec g(x.dim(), 0.0);
    for (int i = 1; i < K; ++i) g[i - 1] = (-static_cast<double>(i) / xK) / fp;
    g[K - 1] = (-(d - s) / (xK * xK)) / fp;
    for (int j = 3; j <= x.L; ++j) g[K + j - 3] = (static_cast<double>(j) / xK) / fp;
    return g;
}

// Theorem 2's K = 2 display, kept as an independent transcription for the
// specialization tests (with the cross term carrying the sign the
// multinomial law dictates).
namespace k2ref {

inline Vec drift(const StateDensity& x) {
    const double d = x.edge_mass();
    const double lam = solve_lambda(x);
    const double p0 = x.u[0] / d;
    const double p1 = x.u[1] * lam * lam / (trunc_exp(2, lam) * d);
    const SizeBias sb = size_bias(x);
    Vec F(x.dim(), 0.0);
    F[0] = -1.0 + sb.Rp1 * (p1 - p0);
    F[1] = -sb.Rp1 * p1;
    for (int j = 3; j <= x.L; ++j) F[2 + j - 3] = -sb.s[j - 3];
    return F;
}

inline Mat covariance(const StateDensity& x) {
    const double d = x.edge_mass();
    const double lam = solve_lambda(x);
    const double p0 = x.u[0] / d;
    const double p1 = x.u[1] * lam * lam / (trunc_exp(2, lam) * d);
    const SizeBias sb = size_bias(x);
    const double B = sb.Rpp1 - sb.Rp1 * sb.Rp1;
    const int D = x.dim();
    Mat G(D, D);
    G(0, 0) = sb.Rp1 * (p0 + p1) + B * (p1 - p0) * (p1 - p0);
    G(0, 1) = G(1, 0) = -sb.Rp1 * p1 - B * (p1 - p0) * p1;
    G(1, 1) = sb.Rp1 * p1 + B * p1 * p1;
    for (int j = 3; j <= x.L; ++j) {
        const double sj = sb.s[j - 3];
        G(0, 2 + j - 3) = G(2 + j - 3, 0) = sj * (j - 1 - sb.Rp1) * (p1 - p0);
        G(1, 2 + j - 3) = G(2 + j - 3, 1) = -sj * (j - 1 - sb.Rp1) * p1;
    }
    for (int l = 3; l <= x.L; ++l)
        for (int k = l; k <= x.L; ++k) {
            double g = -sb.s[l - 3] * sb.s[k - 3];
            if (l == k) g += sb.s[l - 3];
            G(2 + l - 3, 2 + k - 3) = G(2 + k - 3, 2 + l - 3) = g;
        }
    return G;
}

}  // namespace k2ref

}  // namespace corescale

#endif
