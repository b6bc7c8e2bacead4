#pragma once

#include <algorithm>
#include <cstddef>
#include <string>

#include "gridstorm/numerics/matrix.hpp"

namespace gridstorm {

struct DareOptions {
    std::size_t max_iterations = 100'000;
    double tolerance = 1e-10;
    /// Relaxation weight on each Riccati update; 1 is the plain recursion.
    double damping = 1.0;
};

/// One application of the control-form Riccati map
///   f(P) = Q + A'PA - A'PG (R + G'PG)^-1 G'PA.
inline Matrix riccati_map(const Matrix& a, const Matrix& g, const Matrix& q, const Matrix& r,
                          const Matrix& p) {
    const Matrix at = a.transpose();
    const Matrix gt = g.transpose();
    const Matrix atpg = at * p * g;
    const Matrix s = r + gt * p * g;
    return q + at * p * a - atpg * solve(s, gt * p * a);
}

/// Fixed-point residual ||P - f(P)||_inf.
inline double dare_residual(const Matrix& a, const Matrix& g, const Matrix& q, const Matrix& r,
                            const Matrix& p) {
    return (p - riccati_map(a, g, q, r, p)).max_abs();
}

/// Stabilizing solution of the discrete algebraic Riccati equation
///   P = Q + A'PA - A'PG (R + G'PG)^-1 G'PA
/// by fixed-point iteration from P0 = Q. For the filter (Kalman) form pass
/// A' and C' in place of A and G.
inline Matrix solve_dare(const Matrix& a, const Matrix& g, const Matrix& q, const Matrix& r,
                         const DareOptions& opts = {}) {
    const std::size_t n = a.rows();
    if (!a.square()) throw InvalidArgument("solve_dare: A must be square, got " + a.shape());
    if (g.rows() != n) throw InvalidArgument("solve_dare: G has " + std::to_string(g.rows()) +
                                             " rows, expected " + std::to_string(n));
    if (q.rows() != n || q.cols() != n) throw InvalidArgument("solve_dare: Q must be " +
                                                              a.shape());
    if (r.rows() != g.cols() || r.cols() != g.cols())
        throw InvalidArgument("solve_dare: R must be square with G's column count");

    Matrix p = symmetrize(q);
    for (std::size_t it = 0; it < opts.max_iterations; ++it) {
        Matrix next = symmetrize(riccati_map(a, g, q, r, p));
        if (opts.damping != 1.0) next = p * (1.0 - opts.damping) + next * opts.damping;
        if (!next.all_finite() || next.max_abs() > 1e15) {
            throw NumericalError("solve_dare: iteration diverged after " + std::to_string(it) +
                                 " steps (system not stabilizable/detectable?)");
        }
        const double step = (next - p).max_abs();
        p = std::move(next);
        if (step <= opts.tolerance * std::max(1.0, p.max_abs())) return p;
    }
    throw NumericalError("solve_dare: no convergence within " +
                         std::to_string(opts.max_iterations) + " iterations");
}

}  // namespace gridstorm
