#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "dnls/errors.hpp"

namespace dnls {

/// Thomas elimination for a real tridiagonal system. lower[0] and upper[n-1]
/// are unused. No pivoting; a vanishing pivot raises NumericalError.
inline std::vector<double> thomas_solve(const std::vector<double>& lower,
                                        const std::vector<double>& diag,
                                        const std::vector<double>& upper,
                                        const std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    if (lower.size() != n || upper.size() != n || rhs.size() != n)
        throw ValidationError("thomas_solve: size mismatch");
    if (n == 0) return {};
    std::vector<double> c_prime(n), x(n);
    double pivot = diag[0];
    if (pivot == 0.0) throw NumericalError("thomas_solve: zero pivot");
    c_prime[0] = upper[0] / pivot;
    x[0] = rhs[0] / pivot;
    for (std::size_t i = 1; i < n; ++i) {
        pivot = diag[i] - lower[i] * c_prime[i - 1];
        if (pivot == 0.0) throw NumericalError("thomas_solve: zero pivot");
        c_prime[i] = upper[i] / pivot;
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / pivot;
    }
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= c_prime[i] * x[i + 1];
    return x;
}

/// 2x2 real matrix stored row-major.
using Mat2 = std::array<double, 4>;
using Vec2 = std::array<double, 2>;

inline Mat2 mat2_mul(const Mat2& a, const Mat2& b) {
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

inline Vec2 mat2_apply(const Mat2& a, const Vec2& v) {
    return {a[0] * v[0] + a[1] * v[1], a[2] * v[0] + a[3] * v[1]};
}

inline Mat2 mat2_inverse(const Mat2& a) {
    const double det = a[0] * a[3] - a[1] * a[2];
    if (det == 0.0 || !std::isfinite(det)) throw NumericalError("mat2_inverse: singular block");
    const double inv = 1.0 / det;
    return {a[3] * inv, -a[1] * inv, -a[2] * inv, a[0] * inv};
}

/// Block-Thomas elimination for a block-tridiagonal system with 2x2 blocks,
/// as produced by the real-coordinates Jacobian of a nearest-neighbour lattice
/// field. lower[0] and upper[n-1] are unused.
inline std::vector<Vec2> block_thomas_solve(const std::vector<Mat2>& lower,
                                            const std::vector<Mat2>& diag,
                                            const std::vector<Mat2>& upper,
                                            const std::vector<Vec2>& rhs) {
    const std::size_t n = diag.size();
    if (lower.size() != n || upper.size() != n || rhs.size() != n)
        throw ValidationError("block_thomas_solve: size mismatch");
    if (n == 0) return {};
    std::vector<Mat2> c_prime(n);
    std::vector<Vec2> x(n);
    Mat2 inv = mat2_inverse(diag[0]);
    c_prime[0] = mat2_mul(inv, upper[0]);
    x[0] = mat2_apply(inv, rhs[0]);
    for (std::size_t i = 1; i < n; ++i) {
        Mat2 denom = diag[i];
        const Mat2 lc = mat2_mul(lower[i], c_prime[i - 1]);
        for (int k = 0; k < 4; ++k) denom[k] -= lc[k];
        inv = mat2_inverse(denom);
        c_prime[i] = mat2_mul(inv, upper[i]);
        const Vec2 lx = mat2_apply(lower[i], x[i - 1]);
        x[i] = mat2_apply(inv, Vec2{rhs[i][0] - lx[0], rhs[i][1] - lx[1]});
    }
    for (std::size_t i = n - 1; i-- > 0;) {
        const Vec2 cx = mat2_apply(c_prime[i], x[i + 1]);
        x[i][0] -= cx[0];
        x[i][1] -= cx[1];
    }
    return x;
}

}  // namespace dnls
