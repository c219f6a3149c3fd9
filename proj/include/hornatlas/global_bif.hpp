#pragma once

#include "manifold.hpp"

namespace hornatlas {

/// Computable asymptotic classification of a one-sided unstable-manifold
/// branch: it either enters the capture neighborhood of a sink point, crosses
/// the transversal gate of a saddle point on one side, or runs out of budget.
struct branch_fate {
    enum class kind_t { converges_to_sink, passes_saddle, exhausted } kind;
    int index = -1;   // sink point index or saddle point index
    int side = 0;     // sign of the gate-crossing offset along the gate direction
    vec2 where;
    int at_depth = -1;
    growth_stop stopped = growth_stop::watcher;  // growth outcome behind an exhausted fate

    bool operator==(const branch_fate& o) const
    {
        return kind == o.kind && index == o.index && side == o.side;
    }
    bool operator!=(const branch_fate& o) const { return !(*this == o); }
};

inline const char* to_string(branch_fate::kind_t k)
{
    switch (k) {
        case branch_fate::kind_t::converges_to_sink: return "converges_to_sink";
        case branch_fate::kind_t::passes_saddle: return "passes_saddle";
        case branch_fate::kind_t::exhausted: return "exhausted";
    }
    return "?";
}

/// Targets watched during fate classification: sink points with a capture
/// radius, and a gate segment through every saddle point spanned along its
/// stable eigendirection.
struct fate_targets {
    std::vector<vec2> sinks;
    std::vector<vec2> saddles;
    std::vector<vec2> gate_dirs;  // unit stable directions, one per saddle point
    double sink_capture = 1e-5;
    double transversal_len = 1e-3;
};

/// Build targets from the solved sink and saddle orbits. Stable directions
/// are computed at the saddle's base point and transported along the orbit by
/// the one-step Jacobians, with a canonical sign at each point.
template <planar_map_model M>
fate_targets make_fate_targets(const M& m, const param_point& p, const periodic_orbit& sink,
                               const periodic_orbit& saddle, double transversal_len = 1e-3,
                               double sink_capture = 1e-5)
{
    fate_targets t;
    t.sinks = sink.points;
    t.saddles = saddle.points;
    t.sink_capture = sink_capture;
    t.transversal_len = transversal_len;

    double ls = saddle.eig.second.real();  // contracting multiplier (real at a saddle)
    vec2 vs = real_eigenvector(saddle.monodromy, ls);
    t.gate_dirs.reserve(saddle.points.size());
    for (std::size_t k = 0; k < saddle.points.size(); ++k) {
        t.gate_dirs.push_back(canonical_direction(normalized(vs)));
        vs = m.jacobian(p, saddle.points[k]).apply(vs);
    }
    return t;
}

/// Grow one branch until the first event decides its fate. Gate crossings are
/// checked per emitted segment (earliest intersection along the segment wins),
/// sink capture per emitted vertex.
template <planar_map_model M>
branch_fate classify_branch_fate(const M& m, const param_point& p, const periodic_orbit& saddle,
                                 int side, const fate_targets& targets,
                                 const growth_ctrl& ctrl = {},
                                 std::optional<vec2> unstable_dir = std::nullopt)
{
    branch_fate result{branch_fate::kind_t::exhausted};
    bool decided = false;

    auto watcher = [&](const branch_vertex& u, const branch_vertex& v) -> bool {
        // gates first: the crossing lies on the segment before its end vertex
        double best_t = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < targets.saddles.size(); ++k) {
            vec2 g0 = targets.saddles[k] - targets.gate_dirs[k] * targets.transversal_len;
            vec2 g1 = targets.saddles[k] + targets.gate_dirs[k] * targets.transversal_len;
            auto hit = segment_intersection(u.pt, v.pt, g0, g1);
            if (!hit) continue;
            double tseg = dist(u.pt, *hit);
            if (tseg < best_t) {
                best_t = tseg;
                double off = dot(*hit - targets.saddles[k], targets.gate_dirs[k]);
                result = {branch_fate::kind_t::passes_saddle, static_cast<int>(k),
                          off >= 0.0 ? +1 : -1, *hit, v.depth};
                decided = true;
            }
        }
        if (decided) return true;
        for (std::size_t k = 0; k < targets.sinks.size(); ++k) {
            if (dist(v.pt, targets.sinks[k]) < targets.sink_capture) {
                result = {branch_fate::kind_t::converges_to_sink, static_cast<int>(k), 0, v.pt,
                          v.depth};
                decided = true;
                return true;
            }
        }
        return false;
    };

    manifold_branch br = grow_unstable(m, p, saddle, side, ctrl, watcher, unstable_dir);
    if (br.reason == growth_stop::diverged) throw divergence_error{};
    if (!decided)
        result = {branch_fate::kind_t::exhausted, -1, 0, br.verts.back().pt,
                  br.verts.back().depth, br.reason};
    return result;
}

/// Tracks the saddle-sink pair and oriented unstable direction across tau so
/// fate evaluations during a bisection stay on the same orbit family and the
/// same branch side.
template <planar_map_model M>
struct connection_tracker {
    const M& m;
    double a;
    int q;
    tracked_saddle saddle;
    periodic_orbit sink;
    double max_march_step = 2.5e-4;

    connection_tracker(const M& m_, double a_, int q_, const saddle_node_pair& pair)
        : m(m_), a(a_), q(q_), saddle(make_tracked_saddle(m_, pair.saddle)), sink(pair.sink) {}

    void march_to(double tau)
    {
        double tau_from = saddle.orbit.params.tau;
        int n = std::max(1, static_cast<int>(std::ceil(std::abs(tau - tau_from) / max_march_step)));
        for (int i = 1; i <= n; ++i) {
            param_point p{a, tau_from + (tau - tau_from) * static_cast<double>(i) / n};
            sink = continue_orbit(m, sink, p);
        }
        march_saddle(m, saddle, {a, tau}, max_march_step);
    }
};

struct connection_ctrl {
    growth_ctrl growth{.arclength_budget = 25.0};
    double transversal_len = 1e-3;
    double sink_capture = 1e-5;
    int budget_doublings = 2;  // automatic budget escalation on exhausted fates
};

enum class flip_anchor { entry, exit };

/// Fate of the given branch side at tau, with automatic budget escalation
/// while the fate comes back exhausted.
template <planar_map_model M>
branch_fate fate_at_tau(connection_tracker<M>& trk, int side, double tau,
                        const connection_ctrl& ctrl)
{
    trk.march_to(tau);
    param_point p{trk.a, tau};
    fate_targets tg = make_fate_targets(trk.m, p, trk.sink, trk.saddle.orbit,
                                        ctrl.transversal_len, ctrl.sink_capture);
    growth_ctrl g = ctrl.growth;
    branch_fate f{branch_fate::kind_t::exhausted};
    for (int esc = 0; esc <= ctrl.budget_doublings; ++esc) {
        f = classify_branch_fate(trk.m, p, trk.saddle.orbit, side, tg, g, trk.saddle.v_unstable);
        if (f.kind != branch_fate::kind_t::exhausted) return f;
        // refinement underflow or convergence means the branch has collapsed
        // onto an invariant set; more budget cannot change the outcome
        if (f.stopped == growth_stop::refine_underflow || f.stopped == growth_stop::converged ||
            f.stopped == growth_stop::depth_limit)
            return f;
        g.arclength_budget *= 2.0;
    }
    return f;
}

/// Bracket one fate flip inside [tau_lo, tau_hi] by bisection on the fate
/// class. anchor selects which flip: entry locks onto the first change away
/// from the fate at tau_lo, exit onto the last change into the fate at
/// tau_hi. Fates at the two ends must differ.
template <planar_map_model M>
std::pair<double, double> bracket_connection(connection_tracker<M>& trk, int side, double tau_lo,
                                             double tau_hi, double tol, flip_anchor anchor,
                                             const connection_ctrl& ctrl = {},
                                             const step_logger& log = {})
{
    if (!(tau_lo < tau_hi)) throw std::invalid_argument("bracket_connection: bad bracket");
    branch_fate f_lo = fate_at_tau(trk, side, tau_lo, ctrl);
    branch_fate f_hi = fate_at_tau(trk, side, tau_hi, ctrl);
    // an exhausted fate that survived budget escalation is itself a stable
    // class here: the branch has wound onto an attracting circle without
    // meeting any target, which is exactly the pre-crossing situation
    if (f_lo == f_hi)
        throw no_sign_change_error("bracket_connection: same fate at both bracket ends");

    while (tau_hi - tau_lo > tol) {
        double mid = 0.5 * (tau_lo + tau_hi);
        branch_fate f_mid = fate_at_tau(trk, side, mid, ctrl);
        if (log) log("fate", trk.a, mid, static_cast<double>(f_mid.index));
        bool keep_low;
        if (anchor == flip_anchor::entry)
            keep_low = (f_mid == f_lo);   // move toward the first change from the low fate
        else
            keep_low = !(f_mid == f_hi);  // move toward the last change into the high fate
        if (keep_low) {
            tau_lo = mid;
            f_lo = f_mid;
        } else {
            tau_hi = mid;
            f_hi = f_mid;
        }
    }
    return {tau_lo, tau_hi};
}

struct ic_tangency_ctrl {
    long n_transient = 10000;
    long n_keep = 100000;
    std::optional<vec2> z0;
    int locked_period_limit = 20;  // below this, the circle sample is not trusted
    double tol_tau = 1e-6;
};

/// Minimum of the Jacobian determinant over a simulated invariant circle.
template <planar_map_model M>
double min_det_over_ic(const M& m, const param_point& p, const ic_tangency_ctrl& ctrl)
{
    vec2 z0;
    if (ctrl.z0) {
        z0 = *ctrl.z0;
    } else {
        circle_search_ctrl search;
        search.n_transient = ctrl.n_transient;
        search.locked_period_limit = ctrl.locked_period_limit;
        z0 = find_circle_start(m, p, search);
    }
    orbit o = iterate_orbit(m, p, z0, ctrl.n_transient, ctrl.n_keep);
    if (o.diverged) throw tracking_error("min_det_over_ic: orbit diverged");
    if (auto q = detect_period(o, ctrl.locked_period_limit))
        throw tracking_error("min_det_over_ic: circle lost to a period-" + std::to_string(*q) +
                             " locking");
    double mn = std::numeric_limits<double>::infinity();
    for (const vec2& z : o.points) mn = std::min(mn, m.det_jacobian(p, z));
    return mn;
}

/// Parameter at which the invariant circle first touches the rank-0 critical
/// curve, located by bisection on the sign of the minimum determinant over
/// the circle.
template <planar_map_model M>
double ic_tangent_to_critical(const M& m, double a, double tau_lo, double tau_hi,
                              const ic_tangency_ctrl& ctrl = {}, const step_logger& log = {})
{
    if (!(tau_lo < tau_hi)) throw std::invalid_argument("ic_tangent_to_critical: bad bracket");
    double g_lo = min_det_over_ic(m, {a, tau_lo}, ctrl);
    double g_hi = min_det_over_ic(m, {a, tau_hi}, ctrl);
    if ((g_lo < 0) == (g_hi < 0))
        throw no_sign_change_error("ic_tangent_to_critical: same determinant sign at both ends");
    while (tau_hi - tau_lo > ctrl.tol_tau) {
        double mid = 0.5 * (tau_lo + tau_hi);
        double g_mid = min_det_over_ic(m, {a, mid}, ctrl);
        if (log) log("bisect", a, mid, g_mid);
        if ((g_mid < 0) == (g_lo < 0)) {
            tau_lo = mid;
            g_lo = g_mid;
        } else {
            tau_hi = mid;
            g_hi = g_mid;
        }
    }
    return 0.5 * (tau_lo + tau_hi);
}

/// Brackets driving the chaos-bounds report; defaults cover the standard
/// one-parameter slice through the period-37 horn at a = 0.36.
struct chaos_bounds_ctrl {
    int q = 37;
    double seed_tau = 1.778;           // sink resolvable here by simulation
    double first_lo = 1.7765, first_hi = 1.778;
    double cusp_lo = 1.780, cusp_hi = 1.788;
    double second_lo = 1.7835, second_hi = 1.785;
    double tol = 1e-6;
    connection_ctrl conn{};
    cusp_ctrl cusp{};
};

struct chaos_bounds_report {
    double tau_cd_bound = 0;     // entry tangency of the first crossing
    double tau_cusp = 0;
    double tau_chaos_bound = 0;  // exit tangency of the second crossing
    bool ordered = false;
};

/// The three diagnostic parameters in one pass: first-crossing entry, cusp
/// alignment, second-crossing exit, plus the ordering check between them.
template <planar_map_model M>
chaos_bounds_report compute_chaos_bounds(const M& m, double a, const chaos_bounds_ctrl& ctrl = {})
{
    saddle_node_pair pair = find_saddle_node_pair(m, {a, ctrl.seed_tau}, ctrl.q);
    connection_tracker<M> trk(m, a, ctrl.q, pair);

    // the side whose branch reaches a sink fastest under a tiny budget is the
    // sink side; the opposite side carries the first crossing
    trk.march_to(ctrl.first_lo);
    connection_ctrl probe = ctrl.conn;
    probe.growth.arclength_budget = 2.0;
    probe.budget_doublings = 0;
    branch_fate plus = fate_at_tau(trk, +1, ctrl.first_lo, probe);
    int ic_side = (plus.kind == branch_fate::kind_t::converges_to_sink) ? -1 : +1;

    chaos_bounds_report rep;
    auto [e_lo, e_hi] = bracket_connection(trk, ic_side, ctrl.first_lo, ctrl.first_hi, ctrl.tol,
                                           flip_anchor::entry, ctrl.conn);
    rep.tau_cd_bound = 0.5 * (e_lo + e_hi);

    trk.march_to(ctrl.cusp_lo);
    rep.tau_cusp = find_cusp_tau(m, a, trk.saddle, -ic_side, ctrl.cusp_lo, ctrl.cusp_hi, ctrl.cusp);

    trk.march_to(ctrl.second_lo);
    auto [x_lo, x_hi] = bracket_connection(trk, -ic_side, ctrl.second_lo, ctrl.second_hi, ctrl.tol,
                                           flip_anchor::exit, ctrl.conn);
    rep.tau_chaos_bound = 0.5 * (x_lo + x_hi);

    rep.ordered = rep.tau_cd_bound < rep.tau_cusp && rep.tau_cusp < rep.tau_chaos_bound;
    return rep;
}

} // namespace hornatlas
