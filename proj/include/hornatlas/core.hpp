#pragma once

#include <complex>
#include <functional>
#include <stdexcept>
#include <string>

#include "geometry.hpp"

namespace hornatlas {

/// One step event for machine-readable run logs.
using step_logger = std::function<void(const char* event, double a, double tau, double extra)>;

/// Point (a, tau) in parameter space: a is the growth parameter of the
/// underlying vector field, tau the integration time step.
struct param_point {
    double a = 0.0;
    double tau = 0.0;
};

/// Phase-space iterates beyond this radius are treated as divergent.
inline constexpr double escape_radius = 1e8;

inline bool escaped(const vec2& z)
{
    return !finite(z) || std::abs(z.x) > escape_radius || std::abs(z.y) > escape_radius;
}

// ---------------------------------------------------------------------------
// errors

struct divergence_error : std::runtime_error {
    long step = -1;
    explicit divergence_error(long step_ = -1)
        : std::runtime_error("orbit diverged" + (step_ >= 0 ? " at step " + std::to_string(step_) : std::string{})),
          step(step_) {}
};

struct degenerate_parameter_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct no_convergence_error : std::runtime_error {
    int iterations = 0;
    explicit no_convergence_error(int iters, const std::string& what = "Newton iteration did not converge")
        : std::runtime_error(what + " (" + std::to_string(iters) + " iterations)"), iterations(iters) {}
};

struct lower_period_error : std::runtime_error {
    int divisor = 0;
    explicit lower_period_error(int d)
        : std::runtime_error("converged to an orbit of lower period " + std::to_string(d)), divisor(d) {}
};

struct no_sign_change_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct tracking_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct no_locking_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// 2x2 derivative

struct jacobian2 {
    double j11 = 0, j12 = 0, j21 = 0, j22 = 0;

    double trace() const { return j11 + j22; }
    double det() const { return j11 * j22 - j12 * j21; }

    vec2 apply(const vec2& v) const
    {
        return {j11 * v.x + j12 * v.y, j21 * v.x + j22 * v.y};
    }

    jacobian2 mul(const jacobian2& o) const
    {
        // this * o
        return {j11 * o.j11 + j12 * o.j21, j11 * o.j12 + j12 * o.j22,
                j21 * o.j11 + j22 * o.j21, j21 * o.j12 + j22 * o.j22};
    }

    static jacobian2 identity() { return {1, 0, 0, 1}; }
};

using eigen_pair = std::pair<std::complex<double>, std::complex<double>>;

/// Eigenvalues of a 2x2 matrix via the characteristic polynomial, ordered by
/// modulus descending, ties broken by real part descending.
inline eigen_pair eigen2(const jacobian2& m)
{
    double tr = m.trace();
    double de = m.det();
    double disc = tr * tr - 4.0 * de;
    std::complex<double> l1, l2;
    if (disc >= 0.0) {
        double s = std::sqrt(disc);
        // avoid cancellation: compute the larger-magnitude root first
        double r1 = (tr >= 0.0) ? (tr + s) / 2.0 : (tr - s) / 2.0;
        double r2 = (r1 != 0.0) ? de / r1 : (tr - (tr >= 0.0 ? s : -s)) / 2.0;
        l1 = r1;
        l2 = r2;
    } else {
        double im = std::sqrt(-disc) / 2.0;
        l1 = {tr / 2.0, im};
        l2 = {tr / 2.0, -im};
    }
    auto mod1 = std::abs(l1), mod2 = std::abs(l2);
    if (mod1 < mod2 || (mod1 == mod2 && l1.real() < l2.real())) std::swap(l1, l2);
    return {l1, l2};
}

/// Unit eigenvector of m for a real eigenvalue lambda.
inline vec2 real_eigenvector(const jacobian2& m, double lambda)
{
    // rows of (m - lambda I); pick the better-conditioned one
    vec2 r1{m.j11 - lambda, m.j12};
    vec2 r2{m.j21, m.j22 - lambda};
    vec2 v = (norm2(r1) >= norm2(r2)) ? vec2{-r1.y, r1.x} : vec2{-r2.y, r2.x};
    if (norm(v) == 0.0) return {1.0, 0.0};
    return normalized(v);
}

/// Canonical sign for an unoriented direction: nonnegative x, tie broken by
/// nonnegative y.
inline vec2 canonical_direction(vec2 v)
{
    if (v.x < 0.0 || (v.x == 0.0 && v.y < 0.0)) return {-v.x, -v.y};
    return v;
}

} // namespace hornatlas
