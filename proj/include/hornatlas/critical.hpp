#pragma once

#include <functional>
#include <map>

#include "map.hpp"

namespace hornatlas {

/// Polyline sampling of a critical curve: rank 0 is the singular locus of the
/// linearization, rank k its k-th forward image.
struct critical_curve {
    int rank = 0;
    polyline pts;
    param_point params;
};

struct refine_ctrl {
    double max_spacing = 2e-3;
    double max_turn_deg = 5.0;
    double min_param_step = 1e-14;
    std::size_t max_vertices = 2000000;
};

namespace detail {

/// Adaptively sample t -> f(t) over [t0, t1] so consecutive output points
/// respect the spacing and turning-angle bounds. f must be continuous.
template <typename F>
polyline refine_parametric(F&& f, double t0, double t1, std::size_t n_initial,
                           const refine_ctrl& ctrl)
{
    struct node { double t; vec2 p; };
    std::vector<node> nodes;
    nodes.reserve(n_initial);
    for (std::size_t i = 0; i < n_initial; ++i) {
        double t = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(n_initial - 1);
        nodes.push_back({t, f(t)});
    }
    double cos_max = std::cos(ctrl.max_turn_deg * M_PI / 180.0);

    bool changed = true;
    while (changed && nodes.size() < ctrl.max_vertices) {
        changed = false;
        std::vector<node> next;
        next.reserve(nodes.size() * 2);
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            next.push_back(nodes[i]);
            if (i + 1 == nodes.size()) break;
            bool split = false;
            double gap = dist(nodes[i].p, nodes[i + 1].p);
            if (gap > ctrl.max_spacing) split = true;
            if (!split && i > 0) {
                vec2 d0 = nodes[i].p - nodes[i - 1].p;
                vec2 d1 = nodes[i + 1].p - nodes[i].p;
                double n0 = norm(d0), n1 = norm(d1);
                if (n0 > 0 && n1 > 0 && dot(d0, d1) / (n0 * n1) < cos_max) split = true;
            }
            double dt = nodes[i + 1].t - nodes[i].t;
            if (split && std::abs(dt) > ctrl.min_param_step) {
                double tm = nodes[i].t + 0.5 * dt;
                next.push_back({tm, f(tm)});
                changed = true;
            }
        }
        nodes.swap(next);
    }
    polyline out;
    out.reserve(nodes.size());
    for (const node& n : nodes) out.push_back(n.p);
    return out;
}

} // namespace detail

/// Rank-0 critical curve from the closed-form parabola of the model.
template <planar_map_model M>
    requires requires(const M m, param_point p, double x) { m.critical_parabola_y(p, x); }
critical_curve critical_rank0(const M& m, const param_point& p, double x_lo, double x_hi,
                              std::size_t n = 1024)
{
    if (!(x_hi > x_lo) || n < 2) throw std::invalid_argument("critical_rank0: bad range");
    critical_curve c;
    c.rank = 0;
    c.params = p;
    c.pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double x = x_lo + (x_hi - x_lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        c.pts.push_back({x, m.critical_parabola_y(p, x)});
    }
    return c;
}

/// Rank-k image of the rank-0 curve, adaptively refined in the source
/// parameter so the image stays well sampled where the map stretches.
template <planar_map_model M>
    requires requires(const M m, param_point p, double x) { m.critical_parabola_y(p, x); }
critical_curve critical_image(const M& m, const param_point& p, double x_lo, double x_hi,
                              int rank = 1, const refine_ctrl& ctrl = {},
                              std::size_t n_initial = 512)
{
    if (rank < 1) throw std::invalid_argument("critical_image: rank must be >= 1");
    critical_curve c;
    c.rank = rank;
    c.params = p;
    c.pts = detail::refine_parametric(
        [&](double x) {
            vec2 z{x, m.critical_parabola_y(p, x)};
            return apply_n(m, p, z, rank);
        },
        x_lo, x_hi, n_initial, ctrl);
    return c;
}

/// Zero contour of a scalar field over a rectangle by marching squares with
/// linear interpolation on cell edges, stitched into polylines. Deterministic:
/// cells are processed in row-major order and chains joined by shared edges.
inline std::vector<polyline> zero_contours(const std::function<double(double, double)>& field,
                                           const box2& bb, std::size_t nx, std::size_t ny)
{
    if (!bb.valid() || nx < 2 || ny < 2) throw std::invalid_argument("zero_contours: bad grid");
    std::vector<double> vals((nx + 1) * (ny + 1));
    auto xat = [&](std::size_t i) { return bb.xmin + bb.width() * static_cast<double>(i) / static_cast<double>(nx); };
    auto yat = [&](std::size_t j) { return bb.ymin + bb.height() * static_cast<double>(j) / static_cast<double>(ny); };
    for (std::size_t j = 0; j <= ny; ++j)
        for (std::size_t i = 0; i <= nx; ++i)
            vals[j * (nx + 1) + i] = field(xat(i), yat(j));

    // an edge key identifies the grid edge a contour vertex lies on
    auto edge_key = [&](std::size_t i, std::size_t j, bool horizontal) {
        return (static_cast<long long>(j) * (nx + 1) + i) * 2 + (horizontal ? 0 : 1);
    };
    auto interp = [&](double x0, double y0, double v0, double x1, double y1, double v1) {
        double t = v0 / (v0 - v1);
        return vec2{x0 + t * (x1 - x0), y0 + t * (y1 - y0)};
    };

    struct seg { long long k0, k1; vec2 p0, p1; };
    std::vector<seg> segs;
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            double v00 = vals[j * (nx + 1) + i];
            double v10 = vals[j * (nx + 1) + i + 1];
            double v01 = vals[(j + 1) * (nx + 1) + i];
            double v11 = vals[(j + 1) * (nx + 1) + i + 1];
            int c = (v00 > 0) | ((v10 > 0) << 1) | ((v11 > 0) << 2) | ((v01 > 0) << 3);
            if (c == 0 || c == 15) continue;

            // crossing points on the four cell edges
            std::optional<std::pair<long long, vec2>> bottom, top, left, right;
            if ((v00 > 0) != (v10 > 0))
                bottom = {edge_key(i, j, true), interp(xat(i), yat(j), v00, xat(i + 1), yat(j), v10)};
            if ((v01 > 0) != (v11 > 0))
                top = {edge_key(i, j + 1, true), interp(xat(i), yat(j + 1), v01, xat(i + 1), yat(j + 1), v11)};
            if ((v00 > 0) != (v01 > 0))
                left = {edge_key(i, j, false), interp(xat(i), yat(j), v00, xat(i), yat(j + 1), v01)};
            if ((v10 > 0) != (v11 > 0))
                right = {edge_key(i + 1, j, false), interp(xat(i + 1), yat(j), v10, xat(i + 1), yat(j + 1), v11)};

            std::vector<std::pair<long long, vec2>> hits;
            for (auto& h : {bottom, right, top, left})
                if (h) hits.push_back(*h);
            if (hits.size() == 2) {
                segs.push_back({hits[0].first, hits[1].first, hits[0].second, hits[1].second});
            } else if (hits.size() == 4) {
                // saddle cell: resolve by the sign at the cell center
                double vc = field(0.5 * (xat(i) + xat(i + 1)), 0.5 * (yat(j) + yat(j + 1)));
                bool pair_br = ((v10 > 0) == (vc > 0));
                if (pair_br) {
                    segs.push_back({bottom->first, right->first, bottom->second, right->second});
                    segs.push_back({top->first, left->first, top->second, left->second});
                } else {
                    segs.push_back({bottom->first, left->first, bottom->second, left->second});
                    segs.push_back({top->first, right->first, top->second, right->second});
                }
            }
        }
    }

    // stitch segments into chains by shared edge keys
    std::multimap<long long, std::size_t> by_end;
    for (std::size_t s = 0; s < segs.size(); ++s) {
        by_end.insert({segs[s].k0, s});
        by_end.insert({segs[s].k1, s});
    }
    std::vector<bool> used(segs.size(), false);
    std::vector<polyline> out;

    auto take_next = [&](long long key, std::size_t self) -> std::optional<std::size_t> {
        auto [lo, hi] = by_end.equal_range(key);
        for (auto it = lo; it != hi; ++it)
            if (!used[it->second] && it->second != self) return it->second;
        return std::nullopt;
    };

    for (std::size_t s = 0; s < segs.size(); ++s) {
        if (used[s]) continue;
        used[s] = true;
        std::vector<std::pair<long long, vec2>> chain{{segs[s].k0, segs[s].p0}, {segs[s].k1, segs[s].p1}};
        // extend forward then backward
        for (int dir = 0; dir < 2; ++dir) {
            while (true) {
                long long tail = (dir == 0) ? chain.back().first : chain.front().first;
                auto nxt = take_next(tail, static_cast<std::size_t>(-1));
                if (!nxt) break;
                used[*nxt] = true;
                const seg& sg = segs[*nxt];
                auto link = (sg.k0 == tail) ? std::pair{sg.k1, sg.p1} : std::pair{sg.k0, sg.p0};
                if (dir == 0)
                    chain.push_back(link);
                else
                    chain.insert(chain.begin(), link);
            }
        }
        polyline pl;
        pl.reserve(chain.size());
        for (auto& [k, p] : chain) pl.push_back(p);
        out.push_back(std::move(pl));
    }
    return out;
}

/// Marching-squares fallback for the rank-0 critical set of any model.
template <planar_map_model M>
std::vector<polyline> critical_rank0_generic(const M& m, const param_point& p, const box2& bb,
                                             std::size_t nx, std::size_t ny)
{
    return zero_contours([&](double x, double y) { return m.det_jacobian(p, {x, y}); }, bb, nx, ny);
}

/// Unit kernel vector of the linearization at a point of the rank-0 critical
/// curve. Sign convention: nonnegative x component, ties broken upward.
template <planar_map_model M>
vec2 null_direction(const M& m, const param_point& p, const vec2& z, double tol = 1e-8)
{
    if (std::abs(m.det_jacobian(p, z)) > tol)
        throw std::invalid_argument("null_direction: point is not on the critical curve");
    jacobian2 J = m.jacobian(p, z);
    vec2 r1{J.j11, J.j12};
    vec2 r2{J.j21, J.j22};
    vec2 v = (norm2(r1) >= norm2(r2)) ? vec2{-r1.y, r1.x} : vec2{-r2.y, r2.x};
    if (norm(v) == 0.0) v = {1.0, 0.0};
    return canonical_direction(normalized(v));
}

/// A close approach of a curve to a reference curve: location, gap distance
/// and the angle between the local tangents in degrees.
struct curve_approach {
    vec2 point;        // vertex of the query curve at the local distance minimum
    vec2 closest;      // nearest point on the reference curve
    double distance;
    double angle_deg;  // angle between local tangent lines, [0, 90]
};

/// Local minima of vertex-to-curve distance below dist_threshold, each with
/// the tangent-to-tangent angle. Quadratic tangencies show up as near-zero
/// angle; transversal crossings as zero distance with a large angle.
inline std::vector<curve_approach> tangency_gap(const polyline& curve, const polyline& reference,
                                                double dist_threshold = 1e-3)
{
    std::vector<curve_approach> out;
    if (curve.size() < 3 || reference.size() < 2) return out;

    std::vector<polyline_proximity> prox(curve.size());
    for (std::size_t i = 0; i < curve.size(); ++i) prox[i] = distance_to_polyline(curve[i], reference);

    for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
        double d = prox[i].distance;
        if (d >= dist_threshold) continue;
        if (!(d <= prox[i - 1].distance && d <= prox[i + 1].distance)) continue;
        // suppress plateau duplicates: require strictly smaller than one side
        if (d == prox[i - 1].distance && d == prox[i + 1].distance) continue;

        vec2 tan_c = curve[i + 1] - curve[i - 1];
        std::size_t s = prox[i].segment;
        vec2 tan_r = reference[s + 1] - reference[s];
        const vec2& a = reference[s];
        const vec2& b = reference[s + 1];
        double len2 = norm2(b - a);
        double t = len2 > 0 ? std::clamp(dot(curve[i] - a, b - a) / len2, 0.0, 1.0) : 0.0;
        out.push_back({curve[i], a + (b - a) * t, d, line_angle_deg(tan_c, tan_r)});
    }
    return out;
}

/// Transversal crossings of a polyline with the rank-0 critical set, located
/// by sign changes of the Jacobian determinant along segments.
struct det_crossing {
    vec2 point;
    std::size_t segment;
};

template <planar_map_model M>
std::vector<det_crossing> det_sign_crossings(const M& m, const param_point& p, const polyline& pl)
{
    std::vector<det_crossing> out;
    if (pl.size() < 2) return out;
    double prev = m.det_jacobian(p, pl[0]);
    for (std::size_t i = 0; i + 1 < pl.size(); ++i) {
        double next = m.det_jacobian(p, pl[i + 1]);
        if (prev == 0.0) prev = next > 0 ? -0.0 : 0.0;  // nudge exact zeros
        if ((prev < 0) != (next < 0) && prev != 0.0 && next != 0.0) {
            double lo = 0.0, hi = 1.0;
            double flo = prev;
            for (int k = 0; k < 60; ++k) {
                double mid = 0.5 * (lo + hi);
                double fm = m.det_jacobian(p, lerp(pl[i], pl[i + 1], mid));
                if ((fm < 0) == (flo < 0)) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            out.push_back({lerp(pl[i], pl[i + 1], 0.5 * (lo + hi)), i});
        }
        prev = next;
    }
    return out;
}

} // namespace hornatlas
