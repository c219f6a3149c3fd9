#pragma once

#include <array>
#include <functional>

#include "periodic.hpp"

namespace hornatlas {

/// Codimension-1 conditions on a period-q orbit, each defined by one scalar
/// test function g of the monodromy M:
///   saddle_node       det(M - I)
///   neimark_sacker    det(M) - 1, guarded by |tr M| < 2
///   eigenvalue_zero   det(M)
///   equal_eigenvalue  tr(M)^2 - 4 det(M)
///   hopf_fixed        neimark_sacker at q = 1
enum class bif_kind_t { saddle_node, neimark_sacker, eigenvalue_zero, equal_eigenvalue, hopf_fixed };

struct bif_kind {
    bif_kind_t kind;
    int q = 1;
};

inline const char* to_string(bif_kind_t k)
{
    switch (k) {
        case bif_kind_t::saddle_node: return "saddle_node";
        case bif_kind_t::neimark_sacker: return "neimark_sacker";
        case bif_kind_t::eigenvalue_zero: return "eigenvalue_zero";
        case bif_kind_t::equal_eigenvalue: return "equal_eigenvalue";
        case bif_kind_t::hopf_fixed: return "hopf_fixed";
    }
    return "?";
}

inline int kind_period(const bif_kind& k)
{
    return k.kind == bif_kind_t::hopf_fixed ? 1 : k.q;
}

inline double test_function(const bif_kind& k, const jacobian2& M)
{
    switch (k.kind) {
        case bif_kind_t::saddle_node: {
            jacobian2 A{M.j11 - 1.0, M.j12, M.j21, M.j22 - 1.0};
            return A.det();
        }
        case bif_kind_t::neimark_sacker:
        case bif_kind_t::hopf_fixed:
            return M.det() - 1.0;
        case bif_kind_t::eigenvalue_zero:
            return M.det();
        case bif_kind_t::equal_eigenvalue:
            return M.trace() * M.trace() - 4.0 * M.det();
    }
    return 0.0;
}

inline bool guard_ok(const bif_kind& k, const jacobian2& M, double tol = 1e-8)
{
    if (k.kind == bif_kind_t::neimark_sacker || k.kind == bif_kind_t::hopf_fixed)
        return std::abs(M.trace()) < 2.0 - tol;
    return true;
}

struct bif_sample {
    double a = 0, tau = 0;
    vec2 z;
    eigen_pair eig;
    double g = 0;
};

struct bif_curve {
    bif_kind kind;
    std::vector<bif_sample> samples;
    std::string stop_reason;
};

struct trace_ctrl {
    double h0 = 2e-3;
    double h_min = 1e-10;
    double h_max = 2e-2;
    int corrector_max_iter = 10;
    double tol_residual = 1e-11;
    int growth_after_fast = 3;  // corrector iterations at or below which the step doubles
    box2 param_box{0.05, 1.5, 0.05, 3.5};  // (a, tau) domain: x <-> a, y <-> tau
    int direction = +1;
};

namespace detail {

// U = (x, y, a, tau)
using u4 = std::array<double, 4>;

template <planar_map_model M>
std::array<double, 3> residual3(const M& m, const bif_kind& kind, const u4& U)
{
    int q = kind_period(kind);
    param_point p{U[2], U[3]};
    vec2 z{U[0], U[1]};
    auto [fz, Mq] = apply_with_jacobian(m, p, z, q);
    return {fz.x - z.x, fz.y - z.y, test_function(kind, Mq)};
}

/// 3x4 Jacobian of residual3: periodicity rows analytically, test-function row
/// and parameter columns by central differences.
template <planar_map_model M>
std::array<std::array<double, 4>, 3> jacobian34(const M& m, const bif_kind& kind, const u4& U)
{
    int q = kind_period(kind);
    param_point p{U[2], U[3]};
    vec2 z{U[0], U[1]};
    auto [fz, Mq] = apply_with_jacobian(m, p, z, q);
    (void)fz;

    std::array<std::array<double, 4>, 3> J{};
    J[0][0] = Mq.j11 - 1.0;
    J[0][1] = Mq.j12;
    J[1][0] = Mq.j21;
    J[1][1] = Mq.j22 - 1.0;

    for (int c = 0; c < 4; ++c) {
        double h = 1e-6 * std::max(1.0, std::abs(U[c]));
        u4 Up = U, Um = U;
        Up[c] += h;
        Um[c] -= h;
        auto rp = residual3(m, kind, Up);
        auto rm = residual3(m, kind, Um);
        J[2][c] = (rp[2] - rm[2]) / (2.0 * h);
        if (c >= 2) {
            J[0][c] = (rp[0] - rm[0]) / (2.0 * h);
            J[1][c] = (rp[1] - rm[1]) / (2.0 * h);
        }
    }
    return J;
}

inline bool solve4(std::array<std::array<double, 5>, 4>& A, u4& out)
{
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        if (A[piv][col] == 0.0) return false;
        std::swap(A[piv], A[col]);
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            double f = A[r][col] / A[col][col];
            for (int c = col; c < 5; ++c) A[r][c] -= f * A[col][c];
        }
    }
    for (int i = 0; i < 4; ++i) out[i] = A[i][4] / A[i][i];
    return true;
}

/// Unit tangent spanning the null space of the 3x4 Jacobian, by elimination
/// with full column tracking.
inline u4 null_tangent(std::array<std::array<double, 4>, 3> J)
{
    std::array<int, 4> colperm{0, 1, 2, 3};
    for (int row = 0; row < 3; ++row) {
        int pr = row, pc = row;
        double best = 0.0;
        for (int r = row; r < 3; ++r)
            for (int c = row; c < 4; ++c)
                if (std::abs(J[r][c]) > best) {
                    best = std::abs(J[r][c]);
                    pr = r;
                    pc = c;
                }
        if (best == 0.0) break;
        std::swap(J[pr], J[row]);
        for (int r = 0; r < 3; ++r) std::swap(J[r][pc], J[r][row]);
        std::swap(colperm[pc], colperm[row]);
        for (int r = 0; r < 3; ++r) {
            if (r == row) continue;
            double f = J[r][row] / J[row][row];
            for (int c = row; c < 4; ++c) J[r][c] -= f * J[row][c];
        }
    }
    // back substitute with free variable = 1 in permuted column 3
    u4 tperm{};
    tperm[3] = 1.0;
    for (int row = 2; row >= 0; --row) {
        double s = J[row][3];
        for (int c = row + 1; c < 3; ++c) s += J[row][c] * tperm[c];
        tperm[row] = (J[row][row] != 0.0) ? -s / J[row][row] : 0.0;
    }
    u4 t{};
    for (int i = 0; i < 4; ++i) t[colperm[i]] = tperm[i];
    double n = std::sqrt(t[0] * t[0] + t[1] * t[1] + t[2] * t[2] + t[3] * t[3]);
    for (auto& v : t) v /= n;
    return t;
}

/// Corrector: Newton on the 3 defining equations plus the arclength plane
/// through U_pred with normal tang. Returns iterations used, or -1 on failure.
template <planar_map_model M>
int correct(const M& m, const bif_kind& kind, const u4& tang, const u4& U_pred, u4& U,
            const trace_ctrl& ctrl)
{
    U = U_pred;
    for (int it = 1; it <= ctrl.corrector_max_iter; ++it) {
        auto r = residual3(m, kind, U);
        double plane = 0.0;
        for (int i = 0; i < 4; ++i) plane += tang[i] * (U[i] - U_pred[i]);
        double rmax = std::max({std::abs(r[0]), std::abs(r[1]), std::abs(r[2]), std::abs(plane)});
        if (rmax < ctrl.tol_residual) return it;
        auto J34 = jacobian34(m, kind, U);
        std::array<std::array<double, 5>, 4> A{};
        for (int r3 = 0; r3 < 3; ++r3) {
            for (int c = 0; c < 4; ++c) A[r3][c] = J34[r3][c];
            A[r3][4] = -r[r3];
        }
        for (int c = 0; c < 4; ++c) A[3][c] = tang[c];
        A[3][4] = -plane;
        u4 step{};
        if (!solve4(A, step)) return -1;
        for (int i = 0; i < 4; ++i) U[i] += step[i];
        if (!std::isfinite(U[0]) || !std::isfinite(U[1]) || !std::isfinite(U[2]) ||
            !std::isfinite(U[3]))
            return -1;
    }
    return -1;
}

} // namespace detail

/// Pseudo-arclength continuation of one defining condition in the (a, tau)
/// plane. Stops at the step budget, the domain boundary, a guard violation or
/// corrector failure at the minimum step.
template <planar_map_model M>
bif_curve trace_curve(const M& m, const bif_kind& kind, const param_point& start_p,
                      const vec2& start_z, int steps, const trace_ctrl& ctrl = {},
                      const step_logger& log = {})
{
    bif_curve curve;
    curve.kind = kind;
    int q = kind_period(kind);

    detail::u4 U{start_z.x, start_z.y, start_p.a, start_p.tau};
    // settle exactly onto the curve before stepping
    {
        auto J = detail::jacobian34(m, kind, U);
        detail::u4 t = detail::null_tangent(J);
        detail::u4 U0 = U;
        if (detail::correct(m, kind, t, U0, U, ctrl) < 0)
            throw no_convergence_error(ctrl.corrector_max_iter, "trace_curve: start not in corrector basin");
    }

    auto push_sample = [&](const detail::u4& Us) {
        param_point p{Us[2], Us[3]};
        auto [fz, Mq] = apply_with_jacobian(m, p, {Us[0], Us[1]}, q);
        (void)fz;
        curve.samples.push_back({Us[2], Us[3], {Us[0], Us[1]}, eigen2(Mq), test_function(kind, Mq)});
    };
    push_sample(U);

    detail::u4 tang = detail::null_tangent(detail::jacobian34(m, kind, U));
    for (auto& v : tang) v *= ctrl.direction;
    double h = ctrl.h0;
    detail::u4 prev_U = U;

    for (int s = 0; s < steps; ++s) {
        detail::u4 U_pred;
        for (int i = 0; i < 4; ++i) U_pred[i] = U[i] + h * tang[i];
        detail::u4 U_new;
        int iters = detail::correct(m, kind, tang, U_pred, U_new, ctrl);
        if (iters < 0) {
            if (h > ctrl.h_min) {
                h = std::max(ctrl.h_min, h * 0.5);
                --s;
                continue;
            }
            curve.stop_reason = "corrector failure at minimum step";
            break;
        }

        param_point p_new{U_new[2], U_new[3]};
        auto [fz, Mq] = apply_with_jacobian(m, p_new, {U_new[0], U_new[1]}, q);
        (void)fz;
        if (!guard_ok(kind, Mq)) {
            curve.stop_reason = "guard violation";
            break;
        }
        if (!ctrl.param_box.contains({U_new[2], U_new[3]})) {
            curve.stop_reason = "domain boundary";
            break;
        }

        prev_U = U;
        U = U_new;
        push_sample(U);
        if (log) log("step", U[2], U[3], h);

        // secant predictor direction for the next step
        detail::u4 secant;
        double n = 0.0;
        for (int i = 0; i < 4; ++i) {
            secant[i] = U[i] - prev_U[i];
            n += secant[i] * secant[i];
        }
        n = std::sqrt(n);
        if (n > 0) {
            for (auto& v : secant) v /= n;
            tang = secant;
        }
        if (iters <= ctrl.growth_after_fast) h = std::min(ctrl.h_max, 2.0 * h);
    }
    if (curve.stop_reason.empty()) curve.stop_reason = "step budget";
    return curve;
}

struct located_point {
    double tau;
    periodic_orbit orbit;
};

/// Locate a codimension-1 point along the tau slice at fixed a by bisection
/// on the sign of the test function, following the orbit family by
/// warm-started Newton solves. family_tau/family_z give a solved orbit point
/// somewhere in (or near) the bracket.
template <planar_map_model M>
located_point locate_in_tau(const M& m, double a, const bif_kind& kind, double tau_lo,
                            double tau_hi, double family_tau, vec2 family_z,
                            double tol_tau = 1e-9, const step_logger& log = {})
{
    if (!(tau_lo < tau_hi)) throw std::invalid_argument("locate_in_tau: bad bracket");
    int q = kind_period(kind);

    // march the family to an endpoint, then evaluate g at both ends
    auto solve_at = [&](double tau, vec2 guess) {
        return refine_periodic(m, {a, tau}, q, guess, {.allow_lower_period = kind.kind == bif_kind_t::hopf_fixed || q == 1});
    };
    auto march_to = [&](double tau_from, double tau_to, vec2 z) {
        int n = std::max(1, static_cast<int>(std::ceil(std::abs(tau_to - tau_from) / 5e-4)));
        periodic_orbit orb;
        for (int i = 1; i <= n; ++i) {
            double t = tau_from + (tau_to - tau_from) * static_cast<double>(i) / n;
            orb = solve_at(t, z);
            z = orb.points[0];
        }
        return orb;
    };

    periodic_orbit lo_orb = march_to(family_tau, tau_lo, family_z);
    periodic_orbit hi_orb = march_to(tau_lo, tau_hi, lo_orb.points[0]);
    double g_lo = test_function(kind, lo_orb.monodromy);
    double g_hi = test_function(kind, hi_orb.monodromy);
    if ((g_lo < 0) == (g_hi < 0))
        throw no_sign_change_error("locate_in_tau: test function has equal signs at bracket ends");

    vec2 z_lo = lo_orb.points[0], z_hi = hi_orb.points[0];
    periodic_orbit mid_orb = lo_orb;
    while (tau_hi - tau_lo > tol_tau) {
        double mid = 0.5 * (tau_lo + tau_hi);
        mid_orb = solve_at(mid, dist(z_lo, z_hi) < 0.5 ? lerp(z_lo, z_hi, 0.5) : z_lo);
        double g_mid = test_function(kind, mid_orb.monodromy);
        if (log) log("bisect", a, mid, g_mid);
        if ((g_mid < 0) == (g_lo < 0)) {
            tau_lo = mid;
            g_lo = g_mid;
            z_lo = mid_orb.points[0];
        } else {
            tau_hi = mid;
            g_hi = g_mid;
            z_hi = mid_orb.points[0];
        }
    }
    double tau_star = 0.5 * (tau_lo + tau_hi);
    return {tau_star, solve_at(tau_star, mid_orb.points[0])};
}

/// Fold (saddle-node) point of a period-q family at fixed a: Newton on the
/// periodicity equations augmented with det(M - I) = 0, unknowns (x, y, tau).
template <planar_map_model M>
located_point fold_solve(const M& m, double a, int q, vec2 z_guess, double tau_guess,
                         int max_iter = 60)
{
    bif_kind kind{bif_kind_t::saddle_node, q};
    detail::u4 U{z_guess.x, z_guess.y, a, tau_guess};
    for (int it = 0; it < max_iter; ++it) {
        auto r = detail::residual3(m, kind, U);
        double rmax = std::max({std::abs(r[0]), std::abs(r[1]), std::abs(r[2])});
        if (rmax < 1e-12) break;
        auto J34 = detail::jacobian34(m, kind, U);
        // 3x3 system in (x, y, tau): drop the a column
        std::array<std::array<double, 5>, 4> A{};
        for (int rr = 0; rr < 3; ++rr) {
            A[rr][0] = J34[rr][0];
            A[rr][1] = J34[rr][1];
            A[rr][2] = J34[rr][3];
            A[rr][3] = 0.0;
            A[rr][4] = -r[rr];
        }
        A[3][3] = 1.0;
        A[3][4] = 0.0;
        detail::u4 step{};
        if (!detail::solve4(A, step)) throw no_convergence_error(it, "fold_solve: singular system");
        U[0] += step[0];
        U[1] += step[1];
        U[3] += step[2];
        if (!std::isfinite(U[0]) || !std::isfinite(U[3]))
            throw no_convergence_error(it, "fold_solve: diverged");
        if (it + 1 == max_iter) throw no_convergence_error(max_iter, "fold_solve");
    }
    periodic_orbit orb = refine_periodic(m, {a, U[3]}, q, {U[0], U[1]},
                                         {.tol_residual = 1e-11, .allow_lower_period = q == 1});
    return {U[3], orb};
}

/// Root of a p:q resonance horn on the fixed-point Hopf curve: the fixed
/// point's multipliers there are e^{±i theta} with cos(theta) = 1 - tau/2, and
/// the Hopf locus is tau = 1/(2a).
inline param_point horn_root_on_hopf(int p, int q)
{
    double rot = static_cast<double>(p) / static_cast<double>(q);
    if (!(rot > 0.0) || !(rot < 0.5))
        throw std::invalid_argument("horn_root_on_hopf: rotation outside (0, 1/2)");
    double tau = 2.0 * (1.0 - std::cos(2.0 * M_PI * rot));
    return {1.0 / (2.0 * tau), tau};
}

} // namespace hornatlas
