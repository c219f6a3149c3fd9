#pragma once

#include <unordered_map>
#include <unordered_set>

#include "critical.hpp"
#include "periodic.hpp"

namespace hornatlas {

struct branch_vertex {
    vec2 pt;
    int depth;   // number of q-fold map applications from the seed segment
    double t;    // seed-segment parameter in [0, 1]
};

enum class growth_stop {
    budget,            // arclength budget reached
    diverged,
    refine_underflow,  // required seed spacing below the floor
    watcher,           // a segment watcher requested the stop
    depth_limit,
    converged          // branch terminated at an attracting point
};

inline const char* to_string(growth_stop r)
{
    switch (r) {
        case growth_stop::budget: return "budget";
        case growth_stop::diverged: return "diverged";
        case growth_stop::refine_underflow: return "refine_underflow";
        case growth_stop::watcher: return "watcher";
        case growth_stop::depth_limit: return "depth_limit";
        case growth_stop::converged: return "converged";
    }
    return "?";
}

/// One-sided global unstable manifold of a saddle periodic orbit, grown as
/// forward q-iterates of a seed segment on the unstable eigenline.
struct manifold_branch {
    param_point params;
    int q = 0;
    int side = +1;
    vec2 saddle_point;
    vec2 unstable_dir;       // oriented by side
    double unstable_mult = 0.0;
    std::vector<branch_vertex> verts;
    double arclength = 0.0;
    growth_stop reason = growth_stop::budget;
};

struct growth_ctrl {
    double delta = 1e-6;            // seed offset along the unstable eigenline
    double max_spacing = 2e-3;
    double max_turn_deg = 5.0;
    double arclength_budget = 50.0;
    double min_dt = 1e-14;
    int max_depth = 100000;  // generous; growth is budget-bound in practice
    std::size_t max_vertices = 4000000;
    // Seed intervals that would need sub-min_dt splits arise where the branch
    // passes exponentially close to another saddle point. truncate stops the
    // growth there (exact-geometry semantics, used by fate classification);
    // skip cuts the corner and keeps growing (long-range censuses).
    enum class underflow_policy { truncate, skip } on_underflow = underflow_policy::truncate;
};

namespace detail {

/// Watcher invoked on every emitted segment (prev -> next); returning true
/// stops the growth.
using segment_watcher = std::function<bool(const branch_vertex&, const branch_vertex&)>;

} // namespace detail

/// Grow one side of the global unstable manifold of a saddle.
///
/// The seed segment [z0, L^q(z0)] on the unstable eigenline (offset delta from
/// the saddle) is discretized geometrically and mapped forward depth by depth;
/// whenever an image segment violates the spacing or turning bound, seed
/// parameters are inserted and iterated from scratch so every vertex has exact
/// provenance (t, depth).
template <planar_map_model M>
manifold_branch grow_unstable(const M& m, const param_point& p, const periodic_orbit& saddle,
                              int side, const growth_ctrl& ctrl = {},
                              const detail::segment_watcher& watcher = {},
                              std::optional<vec2> unstable_dir = std::nullopt)
{
    if (saddle.stability != stability_class::saddle)
        throw std::invalid_argument("grow_unstable: orbit is not a saddle");
    double lu = saddle.eig.first.real();
    if (saddle.eig.first.imag() != 0.0 || std::abs(lu) <= 1.0)
        throw std::invalid_argument("grow_unstable: no real expanding multiplier");
    if (lu < 0.0)
        throw std::invalid_argument("grow_unstable: negative unstable multiplier unsupported");

    manifold_branch br;
    br.params = p;
    br.q = saddle.q;
    br.side = side;
    br.saddle_point = saddle.points[0];
    br.unstable_mult = lu;

    vec2 v = unstable_dir ? normalized(*unstable_dir)
                          : canonical_direction(real_eigenvector(saddle.monodromy, lu));
    v = v * (side >= 0 ? 1.0 : -1.0);
    br.unstable_dir = v;

    const vec2 p0 = saddle.points[0] + v * ctrl.delta;
    const vec2 p1 = apply_n(m, p, p0, saddle.q);

    // geometric seed parametrization: seed(0)=p0, seed(1)=p1 exactly, interior
    // spaced like the linearization so images advance evenly
    auto seed = [&](double t) {
        double w = (std::pow(lu, t) - 1.0) / (lu - 1.0);
        return lerp(p0, p1, w);
    };

    struct node { double t; vec2 pt; };
    std::vector<node> front;
    for (int i = 0; i <= 8; ++i) {
        double t = static_cast<double>(i) / 8.0;
        front.push_back({t, seed(t)});
    }

    const double cos_max = std::cos(ctrl.max_turn_deg * M_PI / 180.0);
    auto needs_split = [&](const vec2& a, const vec2& b, const vec2* before) {
        if (dist(a, b) > ctrl.max_spacing) return true;
        if (before) {
            vec2 d0 = a - *before;
            vec2 d1 = b - a;
            double n0 = norm(d0), n1 = norm(d1);
            if (n0 > 0 && n1 > 0 && dot(d0, d1) / (n0 * n1) < cos_max) return true;
        }
        return false;
    };

    auto iterate_seed = [&](double t, int depth) -> std::optional<vec2> {
        vec2 z = seed(t);
        for (int d = 0; d < depth; ++d) {
            for (int i = 0; i < saddle.q; ++i) {
                z = m.step_unchecked(p, z);
                if (escaped(z)) return std::nullopt;
            }
        }
        return z;
    };

    br.verts.push_back({p0, 0, 0.0});
    auto emit = [&](const node& n, int depth) -> bool {
        branch_vertex bv{n.pt, depth, n.t};
        branch_vertex prev = br.verts.back();
        br.arclength += dist(prev.pt, bv.pt);
        br.verts.push_back(bv);
        if (watcher && watcher(prev, br.verts.back())) {
            br.reason = growth_stop::watcher;
            return false;
        }
        if (br.arclength >= ctrl.arclength_budget) {
            br.reason = growth_stop::budget;
            return false;
        }
        if (br.verts.size() >= ctrl.max_vertices) {
            br.reason = growth_stop::budget;
            return false;
        }
        return true;
    };

    // depth 0: the seed segment itself (already within tolerance by construction,
    // refine anyway for pathological eigenvalues)
    for (std::size_t i = 1; i < front.size(); ++i)
        if (!emit(front[i], 0)) return br;

    int stalled = 0;
    for (int depth = 1; depth <= ctrl.max_depth; ++depth) {
        // advance the whole front by one q-fold application
        vec2 tip_before = front.back().pt;
        for (node& n : front) {
            for (int i = 0; i < saddle.q; ++i) {
                n.pt = m.step_unchecked(p, n.pt);
                if (escaped(n.pt)) {
                    br.reason = growth_stop::diverged;
                    return br;
                }
            }
        }
        // a front pinned to one point means the branch has run into a sink
        if (dist(tip_before, front.back().pt) < 1e-13 &&
            dist(front.front().pt, front.back().pt) < 1e-13) {
            if (++stalled >= 3) {
                br.reason = growth_stop::converged;
                return br;
            }
        } else {
            stalled = 0;
        }
        // refine: insert seed parameters until spacing/turning bounds hold
        bool underflow = false;
        for (std::size_t i = 0; i + 1 < front.size();) {
            const vec2* before = (i > 0) ? &front[i - 1].pt : nullptr;
            if (!needs_split(front[i].pt, front[i + 1].pt, before)) {
                ++i;
                continue;
            }
            double dt = front[i + 1].t - front[i].t;
            if (dt <= ctrl.min_dt) {
                underflow = true;
                ++i;
                continue;
            }
            double tm = front[i].t + 0.5 * dt;
            auto zm = iterate_seed(tm, depth);
            if (!zm) {
                br.reason = growth_stop::diverged;
                return br;
            }
            front.insert(front.begin() + static_cast<long>(i) + 1, {tm, *zm});
        }
        if (underflow && ctrl.on_underflow == growth_ctrl::underflow_policy::truncate) {
            br.reason = growth_stop::refine_underflow;
            return br;
        }

        // emit this depth's polyline piece; front[0] coincides with the last
        // vertex of the previous depth
        for (std::size_t i = 1; i < front.size(); ++i)
            if (!emit(front[i], depth)) return br;

        // drop excess resolution at the trailing end to keep the front light:
        // coarsen pairs whose images will still satisfy the spacing bound
        if (front.size() > 4) {
            std::vector<node> slim;
            slim.reserve(front.size());
            slim.push_back(front.front());
            for (std::size_t i = 1; i + 1 < front.size(); ++i) {
                double gap = dist(slim.back().pt, front[i + 1].pt);
                if (gap * std::abs(lu) > ctrl.max_spacing * 0.5) slim.push_back(front[i]);
            }
            slim.push_back(front.back());
            front.swap(slim);
        }
    }
    br.reason = growth_stop::depth_limit;
    return br;
}

inline polyline branch_polyline(const manifold_branch& br)
{
    polyline out;
    out.reserve(br.verts.size());
    for (const auto& v : br.verts) out.push_back(v.pt);
    return out;
}

/// A transversal crossing of the branch with the rank-0 critical curve.
struct crossing_event {
    vec2 point;
    vec2 tangent;     // local branch direction (unit)
    vec2 null_dir;    // kernel direction at the crossing (canonical sign)
    double psi_deg;   // signed angle between tangent and null direction, (-90, 90]
    std::size_t segment;
};

/// All determinant-sign crossings of a grown branch, each with the signed
/// alignment angle psi between the branch tangent and the null direction.
template <planar_map_model M>
std::vector<crossing_event> critical_crossings(const M& m, const param_point& p,
                                               const manifold_branch& br)
{
    std::vector<crossing_event> out;
    polyline pl = branch_polyline(br);
    for (const det_crossing& c : det_sign_crossings(m, p, pl)) {
        vec2 tan = normalized(pl[c.segment + 1] - pl[c.segment]);
        vec2 nd = null_direction(m, p, c.point, 1e-6);
        out.push_back({c.point, tan, nd, signed_line_angle_deg(tan, nd), c.segment});
    }
    return out;
}

struct cusp_ctrl {
    growth_ctrl growth{.arclength_budget = 12.0};
    int coarse_steps = 8;          // tau grid used to pick the flipping crossing
    double match_radius = 0.05;    // crossing tracking radius across tau
    double tol_tau = 1e-6;
    double max_march_step = 2.5e-4;
};

/// Parameter at which a tracked critical-curve crossing of the unstable
/// manifold aligns with the null direction (the signed angle psi changes
/// sign). The saddle is re-solved and the branch re-grown at every tau;
/// crossings are tracked by nearest match to the previous crossing point.
template <planar_map_model M>
double find_cusp_tau(const M& m, double a, tracked_saddle ts, int side, double tau_lo,
                     double tau_hi, const cusp_ctrl& ctrl = {})
{
    if (!(tau_lo < tau_hi)) throw std::invalid_argument("find_cusp_tau: bad bracket");

    auto crossings_at = [&](double tau) {
        march_saddle(m, ts, {a, tau}, ctrl.max_march_step);
        manifold_branch br = grow_unstable(m, {a, tau}, ts.orbit, side, ctrl.growth, {},
                                           ts.v_unstable);
        return critical_crossings(m, {a, tau}, br);
    };

    // coarse sweep: follow every crossing chain and find one whose psi flips.
    // The sweep truncates where the saddle family stops being continuable
    // (e.g. past a fold at the top of the bracket).
    int n = std::max(2, ctrl.coarse_steps);
    std::vector<std::vector<crossing_event>> sweep;
    std::vector<double> taus;
    for (int i = 0; i <= n; ++i) {
        double tau = tau_lo + (tau_hi - tau_lo) * static_cast<double>(i) / n;
        try {
            sweep.push_back(crossings_at(tau));
        } catch (const std::exception&) {
            if (i <= 1) throw;
            break;
        }
        taus.push_back(tau);
    }
    n = static_cast<int>(taus.size()) - 1;

    struct chain_hit {
        double lo, hi;
        crossing_event at_lo;
    };
    std::optional<chain_hit> best;
    if (!sweep[0].empty()) {
        for (const crossing_event& start : sweep[0]) {
            crossing_event cur = start;
            for (int i = 1; i <= n; ++i) {
                const crossing_event* next = nullptr;
                double dmin = ctrl.match_radius;
                for (const crossing_event& c : sweep[i]) {
                    double d = dist(c.point, cur.point);
                    if (d < dmin) {
                        dmin = d;
                        next = &c;
                    }
                }
                if (!next) break;
                if ((next->psi_deg < 0) != (cur.psi_deg < 0)) {
                    if (!best || std::abs(next->psi_deg) < std::abs(best->at_lo.psi_deg))
                        best = {taus[i - 1], taus[i], cur};
                    break;
                }
                cur = *next;
            }
        }
    }
    if (!best) throw no_sign_change_error("find_cusp_tau: no psi sign change over the bracket");

    // bisection on the sign of psi at the tracked crossing
    double lo = best->lo, hi = best->hi;
    crossing_event tracked = best->at_lo;
    bool lo_neg = tracked.psi_deg < 0;
    while (hi - lo > ctrl.tol_tau) {
        double mid = 0.5 * (lo + hi);
        auto evs = crossings_at(mid);
        const crossing_event* match = nullptr;
        double dmin = ctrl.match_radius;
        for (const crossing_event& c : evs) {
            double d = dist(c.point, tracked.point);
            if (d < dmin) {
                dmin = d;
                match = &c;
            }
        }
        if (!match) throw tracking_error("find_cusp_tau: tracked crossing lost");
        tracked = *match;
        if ((match->psi_deg < 0) == lo_neg)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Transversal self-intersections among non-adjacent segments of a polyline,
/// found with a uniform hash over segment bounding boxes. Segments shorter
/// than min_seg are ignored: they sit far below the refinement scale and
/// their crossings are floating-point noise, not geometry.
inline std::vector<vec2> polyline_self_intersections(const polyline& pl, double min_seg = 1e-9)
{
    std::vector<vec2> hits;
    if (pl.size() < 4) return hits;

    double cell = 0.0;
    for (std::size_t i = 0; i + 1 < pl.size(); ++i) cell = std::max(cell, dist(pl[i], pl[i + 1]));
    if (cell == 0.0) return hits;

    auto key = [&](long cx, long cy) {
        return (static_cast<long long>(cx) << 32) ^ (static_cast<long long>(cy) & 0xffffffffLL);
    };
    std::unordered_map<long long, std::vector<std::size_t>> grid;
    std::unordered_set<long long> seen;
    auto quantize = [&](const vec2& v) {
        long qx = static_cast<long>(std::llround(v.x / (1e-9 * cell)));
        long qy = static_cast<long>(std::llround(v.y / (1e-9 * cell)));
        return (static_cast<long long>(qx) << 32) ^ (static_cast<long long>(qy) & 0xffffffffLL);
    };
    auto cells_of = [&](std::size_t i, auto&& fn) {
        const vec2& a = pl[i];
        const vec2& b = pl[i + 1];
        long x0 = static_cast<long>(std::floor(std::min(a.x, b.x) / cell));
        long x1 = static_cast<long>(std::floor(std::max(a.x, b.x) / cell));
        long y0 = static_cast<long>(std::floor(std::min(a.y, b.y) / cell));
        long y1 = static_cast<long>(std::floor(std::max(a.y, b.y) / cell));
        for (long cx = x0; cx <= x1; ++cx)
            for (long cy = y0; cy <= y1; ++cy) fn(key(cx, cy));
    };

    for (std::size_t i = 0; i + 1 < pl.size(); ++i) {
        if (dist(pl[i], pl[i + 1]) < min_seg) continue;
        cells_of(i, [&](long long k) {
            auto it = grid.find(k);
            if (it == grid.end()) return;
            for (std::size_t j : it->second) {
                if (i <= j + 1 && j <= i + 1) continue;  // adjacent or identical
                if (auto hit = segment_intersection(pl[i], pl[i + 1], pl[j], pl[j + 1])) {
                    if (seen.insert(quantize(*hit)).second) hits.push_back(*hit);
                }
            }
        });
        cells_of(i, [&](long long k) {
            auto& v = grid[k];
            if (v.empty() || v.back() != i) v.push_back(i);
        });
    }
    return hits;
}

inline std::vector<vec2> self_intersections(const manifold_branch& br)
{
    return polyline_self_intersections(branch_polyline(br));
}

/// Loop census: transversal self-crossings whose two strands are close along
/// the branch. A loop born from a fold alignment is arc-local by nature;
/// restricting the census by arc separation and crossing angle screens out
/// chord-level artifacts between distinct near-coincident windings, which a
/// polyline cannot resolve once the branch has accumulated onto a circle.
struct loop_census_ctrl {
    double max_arc_sep = 1.0;    // phase units of arclength between the strands
    double min_angle_deg = 1.0;  // transversality floor for the crossing
    double min_seg = 1e-9;
};

inline std::vector<vec2> loop_census(const manifold_branch& br, const loop_census_ctrl& ctrl = {})
{
    polyline pl = branch_polyline(br);
    std::size_t n = pl.size();
    std::vector<vec2> hits;
    if (n < 4) return hits;

    std::vector<double> arc(n, 0.0);
    double cell = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        double d = dist(pl[i - 1], pl[i]);
        arc[i] = arc[i - 1] + d;
        cell = std::max(cell, d);
    }
    if (cell == 0.0) return hits;

    auto key = [&](long cx, long cy) {
        return (static_cast<long long>(cx) << 32) ^ (static_cast<long long>(cy) & 0xffffffffLL);
    };
    std::unordered_map<long long, std::vector<std::size_t>> grid;
    auto cells_of = [&](std::size_t i, auto&& fn) {
        long x0 = static_cast<long>(std::floor(std::min(pl[i].x, pl[i + 1].x) / cell));
        long x1 = static_cast<long>(std::floor(std::max(pl[i].x, pl[i + 1].x) / cell));
        long y0 = static_cast<long>(std::floor(std::min(pl[i].y, pl[i + 1].y) / cell));
        long y1 = static_cast<long>(std::floor(std::max(pl[i].y, pl[i + 1].y) / cell));
        for (long cx = x0; cx <= x1; ++cx)
            for (long cy = y0; cy <= y1; ++cy) fn(key(cx, cy));
    };
    std::unordered_set<long long> seen;
    auto quantize = [&](const vec2& v) {
        long qx = static_cast<long>(std::llround(v.x / (1e-9 * cell)));
        long qy = static_cast<long>(std::llround(v.y / (1e-9 * cell)));
        return (static_cast<long long>(qx) << 32) ^ (static_cast<long long>(qy) & 0xffffffffLL);
    };

    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (dist(pl[i], pl[i + 1]) < ctrl.min_seg) continue;
        cells_of(i, [&](long long k) {
            auto it = grid.find(k);
            if (it == grid.end()) return;
            for (std::size_t j : it->second) {
                if (i <= j + 1 && j <= i + 1) continue;
                if (arc[i] - arc[j] > ctrl.max_arc_sep) continue;
                if (line_angle_deg(pl[i + 1] - pl[i], pl[j + 1] - pl[j]) < ctrl.min_angle_deg)
                    continue;
                if (auto hit = segment_intersection(pl[i], pl[i + 1], pl[j], pl[j + 1])) {
                    if (seen.insert(quantize(*hit)).second) hits.push_back(*hit);
                }
            }
        });
        if (dist(pl[i], pl[i + 1]) >= ctrl.min_seg)
            cells_of(i, [&](long long k) {
                auto& v = grid[k];
                if (v.empty() || v.back() != i) v.push_back(i);
            });
    }
    return hits;
}

} // namespace hornatlas
