#ifndef CORESCALE_FSS_HPP
#define CORESCALE_FSS_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "corescale/fluid.hpp"
#include "corescale/linalg.hpp"
#include "corescale/special.hpp"

namespace corescale {

struct SingularSigmaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// [Sigma]_{ij} = m_i^T Q(theta_c^i) (B_{theta_c^i}(theta_c^j))^T m_j for
// i <= j, mirrored to the lower triangle.
inline Mat build_sigma(const ChainModel& model, const FluidGrids& grids,
                       const std::vector<CriticalTime>& crits) {
    const std::size_t N = crits.size();
    Mat sigma(N, N);
    for (std::size_t i = 0; i < N; ++i) {
        const Mat Qi = grids.Q(crits[i].theta_c);
        const Vec& mi = model.faces[crits[i].face_index].normal;
        for (std::size_t j = i; j < N; ++j) {
            const Vec& mj = model.faces[crits[j].face_index].normal;
            const Mat Bij = grids.B_from(crits[i].theta_c, crits[j].theta_c);
            const Vec QBm = Qi * (Bij.transpose() * mj);
            sigma(i, j) = sigma(j, i) = dot(mi, QBm);
        }
    }
    const auto eig = eigen_sym(sigma);
    double trace = 0.0;
    for (std::size_t i = 0; i < N; ++i) trace += sigma(i, i);
    if (eig.values.front() <= 1e-10 * trace)
        throw SingularSigmaError("Sigma is numerically singular (min eigenvalue " +
                                 std::to_string(eig.values.front()) + ")");
    return sigma;
}

// [Gamma]_i = m_i^T B_0(theta_c^i) dy_rho/drho|_0
inline Vec build_gamma(const ChainModel& model, const FluidGrids& grids,
                       const std::vector<CriticalTime>& crits) {
    Vec gamma(crits.size());
    for (std::size_t i = 0; i < crits.size(); ++i) {
        const Vec transported = grids.B0(crits[i].theta_c) * model.dy_drho_at_0;
        gamma[i] = dot(model.faces[crits[i].face_index].normal, transported);
    }
    return gamma;
}

// [Lambda]_i = [m_i . y''(theta_c^i)]^{-1/3} [m_i^T G(y(theta_c^i)) m_i]^{2/3}
inline Vec build_lambda(const ChainModel& model, const FluidGrids& grids,
                        const std::vector<CriticalTime>& crits) {
    Vec lambda(crits.size());
    for (std::size_t i = 0; i < crits.size(); ++i) {
        const Vec& m = model.faces[crits[i].face_index].normal;
        const double curv = dot(m, crits[i].ypp_at);
        if (curv <= 0.0) throw TangencyError("build_lambda: non-positive curvature");
        const Mat G = model.G(crits[i].y_at);
        const double gvar = dot(m, G * m);
        lambda[i] = std::pow(curv, -1.0 / 3.0) * std::pow(gvar, 2.0 / 3.0);
    }
    return lambda;
}

// Symmetric positive-definite inverse square root via Jacobi eigenvalues.
inline Mat inv_sqrt_sym(const Mat& sigma) {
    const auto eig = eigen_sym(sigma);
    const std::size_t n = sigma.rows();
    if (eig.values.front() <= 0.0)
        throw SingularSigmaError("inv_sqrt_sym: matrix not positive definite");
    Mat d(n, n);
    for (std::size_t i = 0; i < n; ++i) d(i, i) = 1.0 / std::sqrt(eig.values[i]);
    return eig.vectors * d * eig.vectors.transpose();
}

// Standard normal distribution function on R^N with identity covariance
// (product of 1-D CDFs) and its gradient.
inline double std_normal_cdf_N(const Vec& x) {
    double p = 1.0;
    for (double xi : x) p *= normal_cdf(xi);
    return p;
}

inline Vec std_normal_cdf_grad(const Vec& x) {
    const std::size_t n = x.size();
    Vec g(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            g[i] *= (i == j) ? normal_pdf(x[j]) : normal_cdf(x[j]);
    }
    return g;
}

struct FssObjects {
    std::size_t N = 0;
    std::vector<double> theta_c;
    Mat sigma;
    Vec gamma;
    Vec lambda;
    Vec a;  // Sigma^{-1/2} Gamma
    Vec b;  // Sigma^{-1/2} Lambda
    double omega = 0.0;
};

inline FssObjects build_fss_objects(const ChainModel& model, const FluidGrids& grids,
                                    const std::vector<CriticalTime>& crits, double omega) {
    FssObjects o;
    o.N = crits.size();
    for (const auto& c : crits) o.theta_c.push_back(c.theta_c);
    o.sigma = build_sigma(model, grids, crits);
    o.gamma = build_gamma(model, grids, crits);
    o.lambda = build_lambda(model, grids, crits);
    const Mat s = inv_sqrt_sym(o.sigma);
    o.a = s * o.gamma;
    o.b = s * o.lambda;
    o.omega = omega;
    return o;
}

struct Prediction {
    long n;
    double r;
    double leading;       // Phi(r a)
    double correction;    // b^T grad Phi(r a) * Omega * n^{-1/6}
    double p_nocore;      // clipped to [0,1]
    bool clipped;
};

// P_nocore(n, rho_c + r n^{-1/2}) ~ Phi(r a) - b^T grad Phi(r a) Omega n^{-1/6}
inline Prediction predict(const FssObjects& o, long n, double r) {
    if (n < 100) throw std::invalid_argument("predict: n < 100");
    Prediction pr;
    pr.n = n;
    pr.r = r;
    Vec ra(o.N);
    for (std::size_t i = 0; i < o.N; ++i) ra[i] = r * o.a[i];
    pr.leading = std_normal_cdf_N(ra);
    const Vec g = std_normal_cdf_grad(ra);
    pr.correction = dot(o.b, g) * o.omega * std::pow(static_cast<double>(n), -1.0 / 6.0);
    const double raw = pr.leading - pr.correction;
    pr.clipped = (raw < 0.0 || raw > 1.0);
    pr.p_nocore = std::min(1.0, std::max(0.0, raw));
    return pr;
}

}  // namespace corescale

#endif
