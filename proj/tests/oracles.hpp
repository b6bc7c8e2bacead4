#pragma once

// Independent reference computations used by the test suites. Nothing here
// calls into the library's numerical kernels beyond the Matrix container.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "gridstorm/numerics/matrix.hpp"

namespace oracle {

using gridstorm::Matrix;

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
    return e;
}

inline Matrix from_eigen(const Eigen::MatrixXd& e) {
    Matrix m(e.rows(), e.cols());
    for (Eigen::Index r = 0; r < e.rows(); ++r)
        for (Eigen::Index c = 0; c < e.cols(); ++c) m(r, c) = e(r, c);
    return m;
}

/// Plain Taylor series with a fixed number of terms.
inline Eigen::MatrixXd taylor_exp(const Eigen::MatrixXd& m, int terms = 50) {
    Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(m.rows(), m.cols());
    Eigen::MatrixXd term = sum;
    for (int k = 1; k < terms; ++k) {
        term = term * m / static_cast<double>(k);
        sum += term;
    }
    return sum;
}

inline std::vector<std::complex<double>> eigenvalues(const Matrix& m) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(to_eigen(m), false);
    std::vector<std::complex<double>> out;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(es.eigenvalues()(i));
    return out;
}

inline double spectral_radius(const Matrix& m) {
    double r = 0.0;
    for (auto l : eigenvalues(m)) r = std::max(r, std::abs(l));
    return r;
}

/// Roots of the characteristic polynomial, from the companion matrix of the
/// Faddeev-LeVerrier coefficients.
inline std::vector<std::complex<double>> charpoly_roots(const Matrix& a) {
    const Eigen::MatrixXd m = to_eigen(a);
    const Eigen::Index n = m.rows();
    std::vector<double> c(n + 1, 0.0);  // c[k] multiplies lambda^(n-k)
    c[0] = 1.0;
    Eigen::MatrixXd mk = Eigen::MatrixXd::Zero(n, n);
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index k = 1; k <= n; ++k) {
        mk = m * mk + c[k - 1] * id;
        c[k] = -(m * mk).trace() / static_cast<double>(k);
    }
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) comp(0, j) = -c[j + 1];
    for (Eigen::Index i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    std::vector<std::complex<double>> out;
    for (Eigen::Index i = 0; i < n; ++i) out.push_back(es.eigenvalues()(i));
    return out;
}

/// Greedy nearest matching distance between two eigenvalue multisets.
inline double spectrum_distance(std::vector<std::complex<double>> a, std::vector<std::complex<double>> b) {
    double worst = 0.0;
    for (auto x : a) {
        auto it = std::min_element(b.begin(), b.end(), [x](auto p, auto q) {
            return std::abs(p - x) < std::abs(q - x);
        });
        worst = std::max(worst, std::abs(*it - x));
        b.erase(it);
    }
    return worst;
}

/// ZOH reference: integrate x' = A x + B u over one period with many forward
/// Euler sub-steps, column by column (unit initial states, then unit inputs).
inline std::pair<Matrix, Matrix> euler_zoh(const Matrix& a, const Matrix& b, double ts, int substeps) {
    const Eigen::MatrixXd ea = to_eigen(a);
    const Eigen::MatrixXd eb = to_eigen(b);
    const Eigen::Index n = ea.rows();
    // Richardson extrapolation of the step-h and step-h/2 Euler solutions.
    auto run = [&](int steps) {
        const double hh = ts / steps;
        Eigen::MatrixXd p = Eigen::MatrixXd::Identity(n, n);
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, eb.cols());
        for (int s = 0; s < steps; ++s) {
            p = p + hh * ea * p;
            g = g + hh * (ea * g + eb);
        }
        return std::make_pair(p, g);
    };
    const auto coarse = run(substeps);
    const auto fine = run(2 * substeps);
    return {from_eigen(2.0 * fine.first - coarse.first), from_eigen(2.0 * fine.second - coarse.second)};
}

/// Filter covariance recursion P <- A P A' + Q - A P C'(C P C' + R)^-1 C P A'.
inline Matrix kalman_covariance(const Matrix& a, const Matrix& c, const Matrix& q, const Matrix& r,
                                int steps) {
    const Eigen::MatrixXd ea = to_eigen(a), ec = to_eigen(c), eq = to_eigen(q), er = to_eigen(r);
    Eigen::MatrixXd p = eq;
    for (int k = 0; k < steps; ++k) {
        const Eigen::MatrixXd s = ec * p * ec.transpose() + er;
        p = ea * p * ea.transpose() + eq -
            ea * p * ec.transpose() * s.inverse() * ec * p * ea.transpose();
    }
    return from_eigen(p);
}

inline Matrix kalman_gain_from(const Matrix& a, const Matrix& c, const Matrix& r, const Matrix& p) {
    const Eigen::MatrixXd ea = to_eigen(a), ec = to_eigen(c), er = to_eigen(r), ep = to_eigen(p);
    return from_eigen(ea * ep * ec.transpose() * (ec * ep * ec.transpose() + er).inverse());
}

}  // namespace oracle
