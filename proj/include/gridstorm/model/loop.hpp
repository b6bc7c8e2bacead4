#pragma once

#include <string>

#include "gridstorm/model/agc.hpp"
#include "gridstorm/numerics/riccati.hpp"

namespace gridstorm {

/// Discrete closed loop of one generator: plant, estimator and controller.
struct DiscreteLoop {
    Matrix A;      ///< 4x4
    Matrix B;      ///< 4x1
    Matrix C;      ///< 2x4
    Matrix D_ff;   ///< 2x1, always zero
    Matrix F;      ///< 4x2, falsified-measurement feedthrough (ZOH of controller_feedthrough)
    Matrix K;      ///< 1x4 controller gain
    Matrix L;      ///< 4x2 Kalman predictor gain
    double Ts = 0.01;
    Matrix Q_n;    ///< 4x4 process noise covariance
    Matrix R_n;    ///< 2x2 measurement noise covariance

    void validate() const {
        auto require = [](bool ok, const std::string& what) {
            if (!ok) throw InvalidArgument("DiscreteLoop: " + what);
        };
        require(A.rows() == kStates && A.cols() == kStates, "A must be 4x4");
        require(B.rows() == kStates && B.cols() == 1, "B must be 4x1");
        require(C.rows() == kOutputs && C.cols() == kStates, "C must be 2x4");
        require(D_ff.rows() == kOutputs && D_ff.cols() == 1 && D_ff.max_abs() == 0.0,
                "D_ff must be a 2x1 zero matrix");
        require(F.rows() == kStates && F.cols() == kOutputs, "F must be 4x2");
        require(K.rows() == 1 && K.cols() == kStates, "K must be 1x4");
        require(L.rows() == kStates && L.cols() == kOutputs, "L must be 4x2");
        require(Q_n.rows() == kStates && Q_n.cols() == kStates, "Q_n must be 4x4");
        require(R_n.rows() == kOutputs && R_n.cols() == kOutputs, "R_n must be 2x2");
        require(Ts > 0, "Ts must be > 0");
        require(spectral_radius(A - L * C) < 1.0, "estimator A - L C is not Schur stable");
    }
};

/// Steady-state predictor gain L = A P C' (C P C' + R)^-1 with P from the
/// filter Riccati equation.
inline Matrix design_kalman_gain(const Matrix& a, const Matrix& c, const Matrix& q_n,
                                 const Matrix& r_n) {
    const Matrix p = solve_dare(a.transpose(), c.transpose(), q_n, r_n);
    const Matrix l = a * p * c.transpose() * inverse(c * p * c.transpose() + r_n);
    if (spectral_radius(a - l * c) >= 1.0)
        throw NumericalError("design_kalman_gain: designed estimator is not stable");
    return l;
}

/// Discrete LQR gain in the regulator convention u = -K x, i.e. the closed
/// loop is A - B K. Q_c = 0 yields K = 0.
inline Matrix design_lqr_gain(const Matrix& a, const Matrix& b, const Matrix& q_c,
                              const Matrix& r_c) {
    const Matrix p = solve_dare(a, b, q_c, r_c);
    const Matrix bt = b.transpose();
    return solve(r_c + bt * p * b, bt * p * a);
}

struct LoopDesign {
    Matrix Q_n = Matrix::identity(kStates) * 1e-6;
    Matrix R_n = Matrix::identity(kOutputs) * 1e-6;
    /// Explicit gains override the designed ones when non-empty.
    Matrix K;
    Matrix L;
    /// LQR weights; used only when K is empty and q_c is non-empty.
    Matrix Q_c;
    Matrix R_c;
};

/// Builds, discretizes and designs the loop of one generator.
inline DiscreteLoop make_loop(const AgcParams& params, double ts, const LoopDesign& design = {}) {
    const ContinuousStateSpace css = build_continuous(params);
    Matrix inputs(kStates, 1 + kOutputs);
    inputs.set_block(0, 0, css.B);
    inputs.set_block(0, 1, controller_feedthrough(css));
    const ZohResult zoh = discretize_zoh(css.A, inputs, ts);

    DiscreteLoop loop;
    loop.A = zoh.A;
    loop.B = zoh.B.block(0, 0, kStates, 1);
    loop.F = zoh.B.block(0, 1, kStates, kOutputs);
    loop.C = css.C;
    loop.D_ff = Matrix(kOutputs, 1);
    loop.Ts = ts;
    loop.Q_n = design.Q_n;
    loop.R_n = design.R_n;

    if (!design.L.empty()) {
        loop.L = design.L;
    } else {
        loop.L = design_kalman_gain(loop.A, loop.C, loop.Q_n, loop.R_n);
    }
    if (!design.K.empty()) {
        loop.K = design.K;
    } else if (!design.Q_c.empty()) {
        // DiscreteLoop::K is applied as u = K x_hat.
        loop.K = -design_lqr_gain(loop.A, loop.B, design.Q_c, design.R_c);
    } else {
        loop.K = Matrix(1, kStates);
    }
    loop.validate();
    return loop;
}

}  // namespace gridstorm
