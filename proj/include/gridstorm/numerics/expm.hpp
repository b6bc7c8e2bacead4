#pragma once

#include <cmath>

#include "gridstorm/numerics/matrix.hpp"

namespace gridstorm {

/// Matrix exponential by scaling and squaring around a degree-13 Taylor core.
///
/// The argument is scaled by 2^-s so that its 1-norm is at most 0.5; the
/// truncation error of the core is then below 0.5^14/14! ~ 7e-16 relative.
inline Matrix mat_exp(const Matrix& m) {
    if (!m.square()) throw InvalidArgument("mat_exp: matrix is not square (" + m.shape() + ")");
    if (!m.all_finite()) throw InvalidArgument("mat_exp: matrix has non-finite entries");

    const std::size_t n = m.rows();
    const double nrm = m.norm1();
    int squarings = 0;
    if (nrm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));

    const Matrix scaled = m * std::ldexp(1.0, -squarings);
    constexpr int kDegree = 13;

    // Horner: I + X(I + X/2(I + X/3(...)))
    Matrix result = Matrix::identity(n);
    for (int k = kDegree; k >= 1; --k) {
        result = Matrix::identity(n) + (scaled * result) * (1.0 / k);
    }
    for (int i = 0; i < squarings; ++i) result = result * result;

    if (!result.all_finite()) throw NumericalError("mat_exp: overflow during squaring");
    return result;
}

}  // namespace gridstorm
