#ifndef CORESCALE_DEGREE_SPEC_HPP
#define CORESCALE_DEGREE_SPEC_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace corescale {

// Asymptotic edge-degree distribution of the hypergraph ensemble: weight
// v0(j) on edge sizes j in {3..L}, plus deterministic per-n integer counts.
class DegreeSpec {
public:
    DegreeSpec(int L, std::map<int, double> v0) : L_(L), v0_(std::move(v0)) {
        if (L_ < 3) throw std::invalid_argument("DegreeSpec: L must be >= 3");
        double total = 0.0;
        for (const auto& [j, w] : v0_) {
            if (j < 3 || j > L_) throw std::invalid_argument("DegreeSpec: degree out of {3..L}");
            if (w < 0.0) throw std::invalid_argument("DegreeSpec: negative weight");
            total += w;
        }
        if (std::fabs(total - 1.0) > 1e-12)
            throw std::invalid_argument("DegreeSpec: weights must sum to 1 within 1e-12");
    }

    int max_degree() const { return L_; }

    double weight(int j) const {
        auto it = v0_.find(j);
        return it == v0_.end() ? 0.0 : it->second;
    }

    const std::map<int, double>& weights() const { return v0_; }

    std::vector<int> support() const {
        std::vector<int> s;
        for (const auto& [j, w] : v0_)
            if (w > 0.0) s.push_back(j);
        return s;
    }

    int min_support_degree() const {
        for (const auto& [j, w] : v0_)
            if (w > 0.0) return j;
        throw std::logic_error("DegreeSpec: empty support");
    }

    // V(x) = sum_j j v0(j) x^{j-1} and its exact polynomial derivatives
    double V(double x) const {
        check_unit(x);
        double s = 0.0;
        for (const auto& [j, w] : v0_) s += j * w * std::pow(x, j - 1);
        return s;
    }

    double V1(double x) const {
        check_unit(x);
        double s = 0.0;
        for (const auto& [j, w] : v0_) s += j * (j - 1) * w * std::pow(x, j - 2);
        return s;
    }

    double V2(double x) const {
        check_unit(x);
        double s = 0.0;
        for (const auto& [j, w] : v0_)
            if (j >= 3) s += j * (j - 1) * (j - 2) * w * std::pow(x, j - 3);
        return s;
    }

    // mean edge degree mu = V(1)
    double mu() const {
        double s = 0.0;
        for (const auto& [j, w] : v0_) s += j * w;
        return s;
    }

    // antiderivative theta(zeta) = int_zeta^1 V(u) du = sum_j v0(j)(1 - zeta^j)
    double theta_of_zeta(double zeta) const {
        check_unit(zeta);
        double s = 0.0;
        for (const auto& [j, w] : v0_) s += w * (1.0 - std::pow(zeta, j));
        return s;
    }

    // Largest-remainder apportionment of n edges among the supported degrees;
    // ties broken toward smaller degree, so counts are deterministic.
    std::map<int, int> counts(long n) const {
        if (n < 1) throw std::invalid_argument("DegreeSpec::counts: n < 1");
        std::map<int, int> out;
        std::vector<std::pair<double, int>> rem;  // (-remainder, degree): sort ascending
        long assigned = 0;
        for (const auto& [j, w] : v0_) {
            if (w == 0.0) continue;
            const double exact = n * w;
            const long base = static_cast<long>(std::floor(exact));
            out[j] = static_cast<int>(base);
            assigned += base;
            rem.push_back({-(exact - base), j});
        }
        std::sort(rem.begin(), rem.end());
        long leftover = n - assigned;
        for (std::size_t i = 0; leftover > 0; ++i, --leftover) out[rem[i % rem.size()].second] += 1;
        return out;
    }

private:
    static void check_unit(double x) {
        if (x < 0.0 || x > 1.0) throw std::domain_error("DegreeSpec: argument outside [0,1]");
    }

    int L_;
    std::map<int, double> v0_;
};

}  // namespace corescale

#endif
