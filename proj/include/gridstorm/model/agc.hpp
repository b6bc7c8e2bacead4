#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "gridstorm/numerics/expm.hpp"
#include "gridstorm/numerics/matrix.hpp"

namespace gridstorm {

inline constexpr std::size_t kStates = 4;   // (dw, dPm, dPv, dPref)
inline constexpr std::size_t kOutputs = 2;  // (dw, dPref)
inline constexpr std::size_t kOmega = 0;
inline constexpr std::size_t kPref = 3;

/// Sign of the speed-deviation coupling into the governor valve equation.
/// `physics` is the droop feedback -1/(R T_G); `printed` keeps the positive
/// entry exactly as the state matrix is usually printed.
enum class GovernorSign { physics, printed };

/// Physical constants of one AGC-controlled synchronous generator.
struct AgcParams {
    double D = 1.0;      ///< droop feedback gain, equal to 1/R
    double R = 1.0;      ///< regulation constant
    double H = 5.0;      ///< inertia constant (s)
    double T_TR = 0.5;   ///< turbine / transmission delay (s)
    double T_G = 0.2;    ///< governor delay (s)
    double K_ref = 7.0;  ///< integrator feedback gain
    double nominal_frequency = 60.0;  ///< Hz
    double rated_power = 100.0;       ///< MW
    GovernorSign governor_sign = GovernorSign::physics;

    /// Throws InvalidArgument naming the offending fields.
    void validate() const {
        auto require = [](bool ok, const std::string& what) {
            if (!ok) throw InvalidArgument("AgcParams: " + what);
        };
        require(std::isfinite(H) && H > 0, "H must be > 0");
        require(std::isfinite(T_TR) && T_TR > 0, "T_TR must be > 0");
        require(std::isfinite(T_G) && T_G > 0, "T_G must be > 0");
        require(std::isfinite(R) && R > 0, "R must be > 0");
        require(std::isfinite(K_ref), "K_ref must be finite");
        require(std::isfinite(nominal_frequency) && nominal_frequency > 0,
                "nominal_frequency must be > 0");
        require(std::isfinite(rated_power) && rated_power > 0, "rated_power must be > 0");
        require(std::isfinite(D) && std::abs(D - 1.0 / R) <= 1e-12 * std::max(1.0, std::abs(D)),
                "D and R are inconsistent: D must equal 1/R");
    }
};

struct ContinuousStateSpace {
    Matrix A;  ///< 4x4
    Matrix B;  ///< 4x1, load input dP_L
    Matrix C;  ///< 2x4, selects (dw, dPref)
};

inline Matrix output_selector() {
    return Matrix{{1, 0, 0, 0}, {0, 0, 0, 1}};
}

/// Continuous-time AGC loop: rotor swing, turbine, governor and the
/// integrator that moves the governor's power reference.
inline ContinuousStateSpace build_continuous(const AgcParams& p) {
    p.validate();
    const double two_h = 2.0 * p.H;
    const double sign = p.governor_sign == GovernorSign::physics ? -1.0 : 1.0;
    ContinuousStateSpace css;
    css.A = Matrix{
        {-p.D / two_h, 1.0 / two_h, 0.0, 0.0},
        {0.0, -1.0 / p.T_TR, 1.0 / p.T_TR, 0.0},
        {sign / (p.R * p.T_G), 0.0, -1.0 / p.T_G, 1.0 / p.T_G},
        {-p.K_ref, 0.0, 0.0, 0.0},
    };
    css.B = Matrix{{-1.0 / two_h}, {0.0}, {0.0}, {0.0}};
    css.C = output_selector();
    return css;
}

/// Columns through which a falsified measurement reaches the plant when the
/// controller consumes measured rather than true signals: the governor and
/// integrator rows of A, restricted to the measured state columns.
inline Matrix controller_feedthrough(const ContinuousStateSpace& css) {
    Matrix f(kStates, kOutputs);
    const std::size_t measured[kOutputs] = {kOmega, kPref};
    for (std::size_t j = 0; j < kOutputs; ++j) {
        for (std::size_t row : {std::size_t{2}, std::size_t{3}}) f(row, j) = css.A(row, measured[j]);
    }
    return f;
}

struct ZohResult {
    Matrix A;
    Matrix B;
};

/// Exact zero-order-hold discretization of x' = A x + B u via the block
/// exponential of [[A, B], [0, 0]] Ts.
inline ZohResult discretize_zoh(const Matrix& a, const Matrix& b, double ts) {
    if (!(ts > 0) || !std::isfinite(ts)) throw InvalidArgument("discretize_zoh: Ts must be > 0");
    if (!a.square() || b.rows() != a.rows()) throw InvalidArgument("discretize_zoh: shape mismatch");
    const std::size_t n = a.rows();
    const std::size_t m = b.cols();
    Matrix big(n + m, n + m);
    big.set_block(0, 0, a * ts);
    big.set_block(0, n, b * ts);
    const Matrix e = mat_exp(big);
    ZohResult out{e.block(0, 0, n, n), e.block(0, n, n, m)};
    if (!out.A.all_finite() || !out.B.all_finite())
        throw NumericalError("discretize_zoh: non-finite result");
    return out;
}

inline double frequency_hz(double domega, double nominal) {
    return nominal + domega / (2.0 * std::numbers::pi);
}

}  // namespace gridstorm
