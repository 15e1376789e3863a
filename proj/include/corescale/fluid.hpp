#ifndef CORESCALE_FLUID_HPP
#define CORESCALE_FLUID_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "corescale/linalg.hpp"

namespace corescale {

struct Face {
    Vec normal;     // unit vector
    double offset;  // face is {x : normal . x >= offset}
    std::string name;
};

// Density-dependent chain handed to the integrator: drift F, its Jacobian A,
// increment covariance G, the initial curve rho -> y_rho with its covariance
// Q_rho, and the polytope the trajectory must stay inside.
struct ChainModel {
    int dim = 0;
    std::function<Vec(const Vec&)> F;
    std::function<Mat(const Vec&)> A;
    std::function<Mat(const Vec&)> G;
    std::function<Vec(double)> y_of_rho;
    Vec dy_drho_at_0;
    std::function<Mat(double)> Q_of_rho;
    std::vector<Face> faces;
};

struct ExitOfDomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TangencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Joint trajectory of y(theta), B_0(theta), Q(theta) on [0, theta_max],
// sampled at uniform nodes with stored derivatives for cubic Hermite
// interpolation. Immutable after construction.
class FluidGrids {
public:
    FluidGrids(const ChainModel& model, double rho, double theta_max, double step)
        : dim_(model.dim), theta_max_(theta_max) {
        if (step <= 0.0 || theta_max <= 0.0) throw std::invalid_argument("FluidGrids: bad grid");
        n_steps_ = static_cast<std::size_t>(std::ceil(theta_max / step));
        h_ = theta_max / n_steps_;

        Vec y = model.y_of_rho(rho);
        Mat B = Mat::identity(dim_);
        Mat Q = model.Q_of_rho(rho);

        y_.reserve(n_steps_ + 1);
        B_.reserve(n_steps_ + 1);
        Q_.reserve(n_steps_ + 1);
        dy_.reserve(n_steps_ + 1);
        dB_.reserve(n_steps_ + 1);
        dQ_.reserve(n_steps_ + 1);

        auto push = [&](const Vec& yv, const Mat& Bv, const Mat& Qv) {
            const Mat a = model.A(yv);
            y_.push_back(yv);
            B_.push_back(Bv);
            Q_.push_back(Qv);
            dy_.push_back(model.F(yv));
            dB_.push_back(a * Bv);
            Mat dq = model.G(yv) + a * Qv + Qv * a.transpose();
            dQ_.push_back(dq);
        };
        push(y, B, Q);

        for (std::size_t k = 0; k < n_steps_; ++k) {
            rk4_step(model, y, B, Q);
            check_inside(model, y, (k + 1) * h_);
            push(y, B, Q);
        }
    }

    int dim() const { return dim_; }
    double theta_max() const { return theta_max_; }
    double step() const { return h_; }
    std::size_t nodes() const { return y_.size(); }
    double node_theta(std::size_t k) const { return k * h_; }
    const Vec& node_y(std::size_t k) const { return y_[k]; }
    const Mat& node_B(std::size_t k) const { return B_[k]; }
    const Mat& node_Q(std::size_t k) const { return Q_[k]; }

    Vec y(double theta) const { return hermite_vec(y_, dy_, theta); }
    Mat B0(double theta) const { return hermite_mat(B_, dB_, theta); }
    Mat Q(double theta) const { return hermite_mat(Q_, dQ_, theta); }

    // B_zeta(theta) = B_0(theta) B_0(zeta)^{-1}
    Mat B_from(double zeta, double theta) const { return B0(theta) * inverse(B0(zeta)); }

private:
    void rk4_step(const ChainModel& model, Vec& y, Mat& B, Mat& Q) const {
        struct D {
            Vec y;
            Mat B, Q;
        };
        auto deriv = [&](const Vec& yv, const Mat& Bv, const Mat& Qv) {
            const Mat a = model.A(yv);
            D d;
            d.y = model.F(yv);
            d.B = a * Bv;
            d.Q = model.G(yv) + a * Qv + Qv * a.transpose();
            return d;
        };
        auto advance = [&](const D& d, double f) {
            Vec yv = y;
            Mat Bv = B, Qv = Q;
            for (int i = 0; i < dim_; ++i) yv[i] += f * d.y[i];
            for (int i = 0; i < dim_; ++i)
                for (int j = 0; j < dim_; ++j) {
                    Bv(i, j) += f * d.B(i, j);
                    Qv(i, j) += f * d.Q(i, j);
                }
            return std::tuple<Vec, Mat, Mat>(yv, Bv, Qv);
        };
        const D k1 = deriv(y, B, Q);
        auto [y2, B2, Q2] = advance(k1, h_ / 2);
        const D k2 = deriv(y2, B2, Q2);
        auto [y3, B3, Q3] = advance(k2, h_ / 2);
        const D k3 = deriv(y3, B3, Q3);
        auto [y4, B4, Q4] = advance(k3, h_);
        const D k4 = deriv(y4, B4, Q4);
        for (int i = 0; i < dim_; ++i)
            y[i] += h_ / 6 * (k1.y[i] + 2 * k2.y[i] + 2 * k3.y[i] + k4.y[i]);
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j) {
                B(i, j) += h_ / 6 * (k1.B(i, j) + 2 * k2.B(i, j) + 2 * k3.B(i, j) + k4.B(i, j));
                Q(i, j) += h_ / 6 * (k1.Q(i, j) + 2 * k2.Q(i, j) + 2 * k3.Q(i, j) + k4.Q(i, j));
            }
    }

    void check_inside(const ChainModel& model, const Vec& y, double theta) const {
        for (const Face& f : model.faces) {
            const double slack = dot(f.normal, y) - f.offset;
            if (slack < -exit_tolerance_)
                throw ExitOfDomainError("trajectory left the polytope through face '" + f.name +
                                        "' at theta=" + std::to_string(theta) +
                                        " (slack=" + std::to_string(slack) + ")");
        }
    }

    std::size_t locate(double theta, double& t) const {
        if (theta < -1e-12 || theta > theta_max_ + 1e-12)
            throw std::domain_error("FluidGrids: theta outside [0, theta_max]");
        double clamped = std::min(std::max(theta, 0.0), theta_max_);
        std::size_t k = std::min(static_cast<std::size_t>(clamped / h_), n_steps_ - 1);
        t = (clamped - k * h_) / h_;
        return k;
    }

    Vec hermite_vec(const std::vector<Vec>& f, const std::vector<Vec>& d, double theta) const {
        double t;
        const std::size_t k = locate(theta, t);
        Vec out(dim_);
        for (int i = 0; i < dim_; ++i) {
            const double t2 = t * t, t3 = t2 * t;
            out[i] = (2 * t3 - 3 * t2 + 1) * f[k][i] + h_ * (t3 - 2 * t2 + t) * d[k][i] +
                     (-2 * t3 + 3 * t2) * f[k + 1][i] + h_ * (t3 - t2) * d[k + 1][i];
        }
        return out;
    }

    Mat hermite_mat(const std::vector<Mat>& f, const std::vector<Mat>& d, double theta) const {
        double t;
        const std::size_t k = locate(theta, t);
        const double t2 = t * t, t3 = t2 * t;
        const double h00 = 2 * t3 - 3 * t2 + 1;
        const double h10 = h_ * (t3 - 2 * t2 + t);
        const double h01 = -2 * t3 + 3 * t2;
        const double h11 = h_ * (t3 - t2);
        Mat out(dim_, dim_);
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j)
                out(i, j) = h00 * f[k](i, j) + h10 * d[k](i, j) + h01 * f[k + 1](i, j) +
                            h11 * d[k + 1](i, j);
        return out;
    }

    int dim_;
    double theta_max_;
    double h_;
    std::size_t n_steps_;
    static constexpr double exit_tolerance_ = 1e-6;
    std::vector<Vec> y_;
    std::vector<Mat> B_, Q_;
    std::vector<Vec> dy_;
    std::vector<Mat> dB_, dQ_;
};

inline FluidGrids integrate(const ChainModel& model, double rho, double theta_max, double step) {
    return FluidGrids(model, rho, theta_max, step);
}

// y''(theta) = A(y) F(y) (Lemma 2.2's F_1)
inline Vec second_derivative(const ChainModel& model, const FluidGrids& grids, double theta) {
    const Vec y = grids.y(theta);
    return model.A(y) * model.F(y);
}

struct CriticalTime {
    double theta_c;
    std::size_t face_index;
    Vec y_at;
    Vec ypp_at;     // A(y) F(y)
    double slack;   // min over the other faces of their slack at theta_c
};

// Scans every face's slack for touching minima and verifies the tangency
// conditions: slack ~ 0, zero normal velocity, positive normal curvature.
inline std::vector<CriticalTime> find_critical_times(const ChainModel& model,
                                                     const FluidGrids& grids,
                                                     double tol_touch = 1e-5) {
    std::vector<CriticalTime> out;
    const std::size_t M = grids.nodes();
    for (std::size_t fi = 0; fi < model.faces.size(); ++fi) {
        const Face& f = model.faces[fi];
        auto slack = [&](double th) { return dot(f.normal, grids.y(th)) - f.offset; };
        std::vector<double> s(M);
        for (std::size_t k = 0; k < M; ++k) s[k] = dot(f.normal, grids.node_y(k)) - f.offset;
        for (std::size_t k = 1; k + 1 < M; ++k) {
            if (!(s[k] <= s[k - 1] && s[k] <= s[k + 1])) continue;
            if (s[k] > tol_touch) continue;
            // golden-section refinement of the touching minimum
            double a = grids.node_theta(k - 1), b = grids.node_theta(k + 1);
            const double gr = 0.61803398874989484820;
            double c = b - gr * (b - a), d = a + gr * (b - a);
            double fc = slack(c), fd = slack(d);
            for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
                if (fc < fd) {
                    b = d; d = c; fd = fc;
                    c = b - gr * (b - a);
                    fc = slack(c);
                } else {
                    a = c; c = d; fc = fd;
                    d = a + gr * (b - a);
                    fd = slack(d);
                }
            }
            CriticalTime ct;
            ct.theta_c = 0.5 * (a + b);
            ct.face_index = fi;
            ct.y_at = grids.y(ct.theta_c);
            ct.ypp_at = model.A(ct.y_at) * model.F(ct.y_at);
            const double touch = slack(ct.theta_c);
            const double vel = dot(f.normal, model.F(ct.y_at));
            const double curv = dot(f.normal, ct.ypp_at);
            if (std::fabs(touch) > tol_touch)
                continue;  // shallow dip, not a tangency
            if (curv <= 0.0)
                throw TangencyError("touching minimum on face '" + f.name +
                                    "' has non-positive curvature");
            if (std::fabs(vel) > 1e-4)
                throw TangencyError("touching minimum on face '" + f.name +
                                    "' has non-vanishing normal velocity");
            ct.slack = INFINITY;
            for (std::size_t gj = 0; gj < model.faces.size(); ++gj) {
                if (gj == fi) continue;
                ct.slack = std::min(ct.slack, dot(model.faces[gj].normal, ct.y_at) -
                                                  model.faces[gj].offset);
            }
            if (ct.slack <= 0.0)
                throw TangencyError("two faces touch simultaneously at theta=" +
                                    std::to_string(ct.theta_c));
            out.push_back(ct);
        }
    }
    std::sort(out.begin(), out.end(),
              [](const CriticalTime& a, const CriticalTime& b) { return a.theta_c < b.theta_c; });
    // merge duplicates from adjacent grid dips
    std::vector<CriticalTime> dedup;
    for (const auto& ct : out) {
        if (!dedup.empty() && std::fabs(ct.theta_c - dedup.back().theta_c) < 1e-7) {
            if (ct.face_index != dedup.back().face_index)
                throw TangencyError("two faces touch at the same critical time");
            continue;
        }
        dedup.push_back(ct);
    }
    return dedup;
}

// Q(theta) recomputed from the explicit representation
//   Q(theta) = B_0 Q(0) B_0^T + int_0^theta B_zeta(theta) G(y(zeta)) B_zeta(theta)^T dzeta
// by composite Simpson quadrature; cross-check for the ODE route.
inline Mat q_by_quadrature(const ChainModel& model, const FluidGrids& grids, double rho,
                           double theta, int panels = 400) {
    if (panels % 2) ++panels;
    const Mat B0t = grids.B0(theta);
    Mat acc = B0t * model.Q_of_rho(rho) * B0t.transpose();
    const double h = theta / panels;
    Mat integral(model.dim, model.dim);
    for (int k = 0; k <= panels; ++k) {
        const double zeta = k * h;
        const Mat Bz = B0t * inverse(grids.B0(zeta));
        const Mat term = Bz * model.G(grids.y(zeta)) * Bz.transpose();
        const double w = (k == 0 || k == panels) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        integral += w * term;
    }
    integral *= h / 3.0;
    return acc + integral;
}

}  // namespace corescale

#endif
