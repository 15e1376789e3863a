#ifndef CORESCALE_HYPERGRAPH_MODEL_HPP
#define CORESCALE_HYPERGRAPH_MODEL_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "corescale/degree_spec.hpp"
#include "corescale/ensemble.hpp"
#include "corescale/fluid.hpp"
#include "corescale/kernel.hpp"
#include "corescale/special.hpp"

namespace corescale {

// The K = 2 peeling chain as a ChainModel over the reduced coordinates
// (u_1, u_2, v_j : j in support). Degrees with zero weight are dropped so
// the polytope has no identically-touching faces.
class HypergraphModel {
public:
    HypergraphModel(DegreeSpec spec, double rho_c)
        : spec_(std::move(spec)), rho_c_(rho_c), support_(spec_.support()) {
        dim_ = 2 + static_cast<int>(support_.size());
        L_ = spec_.max_degree();
    }

    const DegreeSpec& spec() const { return spec_; }
    int dim() const { return dim_; }
    const std::vector<int>& support() const { return support_; }

    // reduced coordinates <-> kernel StateDensity
    StateDensity to_state(const Vec& x) const {
        StateDensity s(2, L_);
        s.u[0] = x[0];
        s.u[1] = x[1];
        for (std::size_t k = 0; k < support_.size(); ++k) s.vdeg(support_[k]) = x[2 + k];
        return s;
    }

    Vec from_state_vec(const Vec& full) const {
        Vec x(dim_);
        x[0] = full[0];
        x[1] = full[1];
        for (std::size_t k = 0; k < support_.size(); ++k) x[2 + k] = full[2 + support_[k] - 3];
        return x;
    }

    Mat from_state_mat(const Mat& full) const {
        std::vector<int> idx = full_indices();
        Mat m(dim_, dim_);
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j) m(i, j) = full(idx[i], idx[j]);
        return m;
    }

    // Kernel argument clamping: RK4 stages may poke marginally outside the
    // domain closure; u_2 and the lambda-equation numerator get floored.
    StateDensity clamped_state(const Vec& x) const {
        StateDensity s = to_state(x);
        if (s.u[1] < clamp_floor_) s.u[1] = clamp_floor_;
        return s;
    }

    ChainModel model(double epsilon = 0.01) const {
        ChainModel m;
        m.dim = dim_;
        m.F = [this](const Vec& x) { return from_state_vec(drift(clamped_state(x))); };
        m.A = [this](const Vec& x) {
            return from_state_mat(jacobian(clamped_state(x), clamp_floor_).A);
        };
        m.G = [this](const Vec& x) { return from_state_mat(covariance(clamped_state(x))); };
        m.y_of_rho = [this](double rho) { return initial_y(rho); };
        m.dy_drho_at_0 = dy_drho();
        m.Q_of_rho = [this](double rho) { return initial_Q(rho); };

        // faces: u_1 >= 0 first (the tangent one), then the bookkeeping faces
        auto unit = [this](int i, const std::string& name) {
            Face f;
            f.normal = Vec(dim_, 0.0);
            f.normal[i] = 1.0;
            f.offset = 0.0;
            f.name = name;
            return f;
        };
        m.faces.push_back(unit(0, "u1"));
        m.faces.push_back(unit(1, "u2"));
        for (std::size_t k = 0; k < support_.size(); ++k)
            m.faces.push_back(unit(2 + static_cast<int>(k), "v" + std::to_string(support_[k])));
        // d(v) - u_1 - 2 u_2 >= 0 (kernel validity margin), normalized
        Face hface;
        hface.normal = Vec(dim_, 0.0);
        hface.normal[0] = -1.0;
        hface.normal[1] = -2.0;
        for (std::size_t k = 0; k < support_.size(); ++k) hface.normal[2 + k] = support_[k];
        double nn = norm(hface.normal);
        for (double& c : hface.normal) c /= nn;
        hface.offset = 0.0;
        hface.name = "edge-margin";
        m.faces.push_back(hface);
        (void)epsilon;
        return m;
    }

    Vec initial_y(double rho) const {
        const InitialMoments im = initial_moments(spec_.mu(), rho);
        Vec y(dim_, 0.0);
        y[0] = im.u_rho[0];
        y[1] = im.u_rho[1];
        for (std::size_t k = 0; k < support_.size(); ++k) y[2 + k] = spec_.weight(support_[k]);
        return y;
    }

    Mat initial_Q(double rho) const {
        const InitialMoments im = initial_moments(spec_.mu(), rho);
        Mat Q(dim_, dim_);
        Q(0, 0) = im.Q_rho(0, 0);
        Q(0, 1) = Q(1, 0) = im.Q_rho(0, 1);
        Q(1, 1) = im.Q_rho(1, 1);
        return Q;
    }

    Vec dy_drho() const {
        const Vec d2 = initial_mean_drho(spec_.mu(), rho_c_);
        Vec d(dim_, 0.0);
        d[0] = d2[0];
        d[1] = d2[1];
        return d;
    }

    // ---- closed-form solution (hypergraph ODE appendix) ----
    //
    // theta(zeta) = int_zeta^1 V(u) du; inverting gives zeta(theta), then
    //   u_1 = h [zeta - 1 + e^{-h/rho}],  u_2 = rho e^{-h/rho} e_2(h/rho),
    //   v_j = v0(j) zeta^j,               with h = V(zeta).
    double theta_of_zeta(double zeta) const { return spec_.theta_of_zeta(zeta); }

    double zeta_of_theta(double theta) const {
        const double total = theta_of_zeta(0.0);  // = sum_j v0(j) = 1
        if (theta < 0.0 || theta > total)
            throw std::domain_error("zeta_of_theta: theta outside [0, theta(0+))");
        // safeguarded Newton on theta(zeta) - theta = 0; d theta/d zeta = -V(zeta)
        double lo = 0.0, hi = 1.0, z = 1.0 - theta;
        for (int it = 0; it < 200; ++it) {
            const double f = theta_of_zeta(z) - theta;
            if (std::fabs(f) < 1e-15) break;
            if (f > 0.0) lo = z; else hi = z;
            const double V = spec_.V(z);
            double next = (V > 0.0) ? z + f / V : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::fabs(next - z) < 1e-16) { z = next; break; }
            z = next;
        }
        return z;
    }

    Vec closed_form(double theta, double rho) const {
        const double z = zeta_of_theta(theta);
        const double h = spec_.V(z);
        Vec y(dim_, 0.0);
        y[0] = h * (z - 1.0 + std::exp(-h / rho));
        y[1] = rho * std::exp(-h / rho) * trunc_exp(2, h / rho);
        for (std::size_t k = 0; k < support_.size(); ++k)
            y[2 + k] = spec_.weight(support_[k]) * std::pow(z, support_[k]);
        return y;
    }

    // theta_bar policy: midway between the last critical time and the
    // θ(ζ -> 0) endpoint truncated at ζ = 1e-6
    double theta_bar(const std::vector<double>& Z) const {
        double theta_last = 0.0;
        for (double z : Z) theta_last = std::max(theta_last, theta_of_zeta(z));
        return 0.5 * (theta_last + theta_of_zeta(1e-6));
    }

private:
    std::vector<int> full_indices() const {
        std::vector<int> idx = {0, 1};
        for (int j : support_) idx.push_back(2 + j - 3);
        return idx;
    }

    DegreeSpec spec_;
    double rho_c_;
    std::vector<int> support_;
    int dim_;
    int L_;
    static constexpr double clamp_floor_ = 1e-9;
};

}  // namespace corescale

#endif
