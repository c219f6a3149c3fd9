#pragma once

#include <concepts>
#include <vector>

#include "core.hpp"

namespace hornatlas {

namespace detail {

/// Real roots of x^3 + p x + q, multiple roots collapsed.
///
/// Closed-form (trigonometric in the three-root case) for robust counts, then
/// one Newton polish per root. A relative discriminant below 1e-12 is treated
/// as the fold boundary and reported as a double root (count 2).
struct cubic_roots {
    double r[3];
    int count = 0;           // number of distinct real roots: 1, 2 or 3
    int double_root = -1;    // index into r of the double root, if count == 2
};

inline cubic_roots depressed_cubic_roots(double p, double q)
{
    cubic_roots out;
    double disc = -4.0 * p * p * p - 27.0 * q * q;
    double scale = std::abs(4.0 * p * p * p) + std::abs(27.0 * q * q);
    double rel = scale > 0.0 ? disc / scale : 0.0;

    if (scale == 0.0) {
        out.r[0] = 0.0;  // triple root
        out.count = 1;
    } else if (rel > 1e-12) {
        // three distinct real roots
        double m = 2.0 * std::sqrt(-p / 3.0);
        double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
        double phi = std::acos(arg);
        for (int k = 0; k < 3; ++k)
            out.r[k] = m * std::cos(phi / 3.0 - 2.0 * M_PI * k / 3.0);
        out.count = 3;
    } else if (rel < -1e-12) {
        // one real root; Cardano with the large-magnitude cube root first
        double d = std::sqrt(q * q / 4.0 + p * p * p / 27.0);
        double u = std::cbrt(-q / 2.0 - (q >= 0.0 ? d : -d));
        double v = (u != 0.0) ? -p / (3.0 * u) : 0.0;
        out.r[0] = u + v;
        out.count = 1;
    } else {
        // fold boundary: double root plus a simple one
        double s = -3.0 * q / (2.0 * p);  // double root (p != 0 since scale > 0)
        out.r[0] = s;
        out.r[1] = -2.0 * s;
        out.count = 2;
        out.double_root = 0;
    }

    // one Newton step per root, guarded near critical points of the cubic
    for (int k = 0; k < out.count; ++k) {
        double x = out.r[k];
        double f = x * x * x + p * x + q;
        double df = 3.0 * x * x + p;
        if (std::abs(df) > 1e-12 * (std::abs(x * x) * 3.0 + std::abs(p) + 1e-300))
            out.r[k] = x - f / df;
    }
    return out;
}

} // namespace detail

/// Planar map family arising from an explicit Euler step of the planar limit
/// of a familiar three-variable flow:
///
///   x' = (1 + a tau) x - tau x y
///   y' = (1 - tau) y + tau x^2
///
/// The map is noninvertible: a phase point has one or three rank-1 preimages,
/// two on the fold locus itself.
struct euler_lorenz_map {
    vec2 apply(const param_point& p, const vec2& z) const
    {
        vec2 w{(1.0 + p.a * p.tau) * z.x - p.tau * z.x * z.y,
               (1.0 - p.tau) * z.y + p.tau * z.x * z.x};
        if (escaped(w)) throw divergence_error{};
        return w;
    }

    /// Same step without the divergence check, for loops that watch for
    /// escape themselves.
    vec2 step_unchecked(const param_point& p, const vec2& z) const
    {
        return {(1.0 + p.a * p.tau) * z.x - p.tau * z.x * z.y,
                (1.0 - p.tau) * z.y + p.tau * z.x * z.x};
    }

    jacobian2 jacobian(const param_point& p, const vec2& z) const
    {
        return {1.0 + p.a * p.tau - p.tau * z.y, -p.tau * z.x,
                2.0 * p.tau * z.x, 1.0 - p.tau};
    }

    double det_jacobian(const param_point& p, const vec2& z) const
    {
        return (1.0 + p.a * p.tau - p.tau * z.y) * (1.0 - p.tau) +
               2.0 * p.tau * p.tau * z.x * z.x;
    }

    /// All rank-1 preimages of w. Requires tau != 1 (the y-update cannot be
    /// inverted there). The x-coordinates solve
    ///   tau^2 x^3 + ((1-tau)(1+a tau) - tau y_w) x - (1-tau) x_w = 0
    /// and y follows from the second component.
    std::vector<vec2> preimages(const param_point& p, const vec2& w) const
    {
        require_invertible_y(p);
        double t = p.tau;
        double pc = ((1.0 - t) * (1.0 + p.a * t) - t * w.y) / (t * t);
        double qc = -(1.0 - t) * w.x / (t * t);
        auto roots = detail::depressed_cubic_roots(pc, qc);
        std::vector<vec2> out;
        out.reserve(roots.count);
        for (int k = 0; k < roots.count; ++k) {
            double x = roots.r[k];
            out.push_back({x, (w.y - t * x * x) / (1.0 - t)});
        }
        return out;
    }

    /// y(x) of the rank-0 critical locus (the fold parabola where the
    /// linearization is singular). Requires tau != 1.
    double critical_parabola_y(const param_point& p, double x) const
    {
        require_invertible_y(p);
        return (1.0 + p.a * p.tau) / p.tau + 2.0 * p.tau * x * x / (1.0 - p.tau);
    }

    /// x >= 0 branch of the critical parabola at height y, or 0 above the apex.
    double critical_parabola_x_right(const param_point& p, double y) const
    {
        require_invertible_y(p);
        double t = p.tau;
        double arg = (1.0 - t) * (t * y - (1.0 + p.a * t)) / (2.0 * t * t);
        return arg > 0.0 ? std::sqrt(arg) : 0.0;
    }

    static void require_invertible_y(const param_point& p)
    {
        if (p.tau == 1.0)
            throw degenerate_parameter_error("tau = 1 is a degenerate parameter slice");
        if (!(p.tau > 0.0)) throw degenerate_parameter_error("tau must be positive");
    }
};

template <typename M>
concept planar_map_model = requires(const M m, param_point p, vec2 z) {
    { m.apply(p, z) } -> std::convertible_to<vec2>;
    { m.jacobian(p, z) } -> std::convertible_to<jacobian2>;
    { m.det_jacobian(p, z) } -> std::convertible_to<double>;
    { m.preimages(p, z) } -> std::convertible_to<std::vector<vec2>>;
};

template <planar_map_model M>
vec2 apply_n(const M& m, const param_point& p, vec2 z, long n)
{
    for (long i = 0; i < n; ++i) z = m.apply(p, z);
    return z;
}

/// q-fold composition together with the chain-rule Jacobian product.
template <planar_map_model M>
std::pair<vec2, jacobian2> apply_with_jacobian(const M& m, const param_point& p, vec2 z, long q)
{
    jacobian2 J = jacobian2::identity();
    for (long i = 0; i < q; ++i) {
        J = m.jacobian(p, z).mul(J);
        z = m.apply(p, z);
    }
    return {z, J};
}

template <planar_map_model M>
polyline polyline_image(const M& m, const param_point& p, const polyline& curve)
{
    if (curve.empty()) throw std::invalid_argument("polyline_image: empty curve");
    polyline out;
    out.reserve(curve.size());
    for (const vec2& z : curve) out.push_back(m.apply(p, z));
    return out;
}

/// Rank-1 preimages of a polyline, threaded into continuous branches.
///
/// Matching walks the vertices in order and extends each open branch with the
/// preimage point nearest to a linear extrapolation of its tip; extrapolation
/// rather than plain nearest-neighbor keeps branch identity through fold
/// points where two preimages collide.
template <planar_map_model M>
std::vector<polyline> polyline_preimages(const M& m, const param_point& p, const polyline& curve)
{
    if (curve.empty()) throw std::invalid_argument("polyline_preimages: empty curve");

    struct thread_state {
        polyline pts;
        bool open = true;
    };
    std::vector<thread_state> threads;

    for (const vec2& w : curve) {
        std::vector<vec2> pre = m.preimages(p, w);
        std::vector<bool> used(pre.size(), false);

        // predicted positions of open threads
        std::vector<std::pair<std::size_t, vec2>> open_tips;
        for (std::size_t ti = 0; ti < threads.size(); ++ti) {
            if (!threads[ti].open) continue;
            const polyline& pts = threads[ti].pts;
            vec2 predicted = pts.back();
            if (pts.size() >= 2) predicted = pts.back() + (pts.back() - pts[pts.size() - 2]);
            open_tips.push_back({ti, predicted});
        }

        // greedy global matching by increasing distance
        struct cand { double d; std::size_t thread; std::size_t root; };
        std::vector<cand> cands;
        for (auto& [ti, predicted] : open_tips)
            for (std::size_t ri = 0; ri < pre.size(); ++ri)
                cands.push_back({dist(predicted, pre[ri]), ti, ri});
        std::sort(cands.begin(), cands.end(), [](const cand& a, const cand& b) { return a.d < b.d; });

        std::vector<bool> extended(threads.size(), false);
        for (const cand& c : cands) {
            if (used[c.root] || extended[c.thread]) continue;
            threads[c.thread].pts.push_back(pre[c.root]);
            used[c.root] = true;
            extended[c.thread] = true;
        }
        for (auto& [ti, predicted] : open_tips)
            if (!extended[ti]) threads[ti].open = false;
        for (std::size_t ri = 0; ri < pre.size(); ++ri)
            if (!used[ri]) threads.push_back({{pre[ri]}, true});
    }

    std::vector<polyline> out;
    for (auto& t : threads)
        if (t.pts.size() >= 1) out.push_back(std::move(t.pts));
    return out;
}

} // namespace hornatlas
