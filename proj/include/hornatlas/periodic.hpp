#pragma once

#include <random>

#include "orbit.hpp"

namespace hornatlas {

enum class stability_class {
    saddle,
    attracting_node,
    attracting_focus,
    repelling_node,
    repelling_focus,
    non_hyperbolic
};

inline const char* to_string(stability_class s)
{
    switch (s) {
        case stability_class::saddle: return "saddle";
        case stability_class::attracting_node: return "attracting_node";
        case stability_class::attracting_focus: return "attracting_focus";
        case stability_class::repelling_node: return "repelling_node";
        case stability_class::repelling_focus: return "repelling_focus";
        case stability_class::non_hyperbolic: return "non_hyperbolic";
    }
    return "?";
}

/// Multiplier-based stability. Saddle means real multipliers with moduli
/// straddling 1; node vs focus by the sign of the discriminant; any modulus
/// within tol_hyp of 1 is non-hyperbolic.
inline stability_class classify_multipliers(const eigen_pair& eig, double tol_hyp = 1e-8)
{
    double m1 = std::abs(eig.first), m2 = std::abs(eig.second);
    if (std::abs(m1 - 1.0) < tol_hyp || std::abs(m2 - 1.0) < tol_hyp)
        return stability_class::non_hyperbolic;
    bool complex_pair = eig.first.imag() != 0.0;
    if (!complex_pair && (m1 - 1.0) * (m2 - 1.0) < 0.0) return stability_class::saddle;
    bool attracting = m1 < 1.0;
    if (complex_pair)
        return attracting ? stability_class::attracting_focus : stability_class::repelling_focus;
    return attracting ? stability_class::attracting_node : stability_class::repelling_node;
}

struct periodic_orbit {
    param_point params;
    int q = 0;
    std::vector<vec2> points;  // iteration order, points[0] is the solved point
    jacobian2 monodromy;       // Jacobian product along one period from points[0]
    eigen_pair eig;
    stability_class stability = stability_class::non_hyperbolic;
    double residual = 0.0;     // |L^q(z) - z| at points[0]
};

struct newton_options {
    int max_iterations = 50;
    double tol_residual = 1e-12;
    double tol_step = 1e-13;
    double lower_period_tol = 1e-8;
    bool allow_lower_period = false;
};

namespace detail {

inline vec2 solve2(const jacobian2& A, const vec2& b)
{
    double det = A.det();
    if (det == 0.0) throw no_convergence_error(0, "singular 2x2 system");
    return {(b.x * A.j22 - b.y * A.j12) / det, (b.y * A.j11 - b.x * A.j21) / det};
}

} // namespace detail

/// Newton's method on L^q(z) - z = 0 from a guess, with step halving when the
/// residual increases. Rejects convergence onto an orbit whose period is a
/// proper divisor of q unless explicitly allowed.
template <planar_map_model M>
periodic_orbit refine_periodic(const M& m, const param_point& p, int q, vec2 guess,
                               const newton_options& opt = {})
{
    if (q < 1) throw std::invalid_argument("refine_periodic: q must be >= 1");
    vec2 z = guess;
    auto residual_at = [&](const vec2& zz) {
        try {
            return norm(apply_n(m, p, zz, q) - zz);
        } catch (const divergence_error&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    double res = residual_at(z);
    if (!std::isfinite(res)) throw no_convergence_error(0, "refine_periodic: guess diverges");
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        if (res < opt.tol_residual) break;
        auto [fz, Mq] = apply_with_jacobian(m, p, z, q);
        vec2 F = fz - z;
        jacobian2 A{Mq.j11 - 1.0, Mq.j12, Mq.j21, Mq.j22 - 1.0};
        vec2 step = detail::solve2(A, F);
        double damping = 1.0;
        vec2 z_new = z - step;
        double res_new = residual_at(z_new);
        int halvings = 0;
        while (res_new > res && halvings < 30) {
            damping *= 0.5;
            z_new = z - step * damping;
            res_new = residual_at(z_new);
            ++halvings;
        }
        double moved = norm(step) * damping;
        z = z_new;
        res = res_new;
        if (moved < opt.tol_step) break;
    }
    if (!(res < opt.tol_residual) ) {
        // allow exit on tiny steps only if the residual is still acceptable
        if (!(res < 1e-10)) throw no_convergence_error(it);
    }

    if (!opt.allow_lower_period) {
        for (int d = 1; d < q; ++d) {
            if (q % d != 0) continue;
            if (norm(apply_n(m, p, z, d) - z) < opt.lower_period_tol)
                throw lower_period_error(d);
        }
    }

    periodic_orbit orb;
    orb.params = p;
    orb.q = q;
    orb.points.reserve(q);
    vec2 w = z;
    jacobian2 J = jacobian2::identity();
    for (int i = 0; i < q; ++i) {
        orb.points.push_back(w);
        J = m.jacobian(p, w).mul(J);
        w = m.apply(p, w);
    }
    orb.monodromy = J;
    orb.eig = eigen2(J);
    orb.stability = classify_multipliers(orb.eig);
    orb.residual = norm(w - z);
    return orb;
}

/// Re-solve an orbit at nearby parameters, warm-started from its old point.
template <planar_map_model M>
periodic_orbit continue_orbit(const M& m, const periodic_orbit& orb, const param_point& p_new,
                              const newton_options& opt = {})
{
    return refine_periodic(m, p_new, orb.q, orb.points[0], opt);
}

struct simulation_seeds {
    std::vector<vec2> sink;           // q points of the attracting orbit, iteration order
    std::vector<vec2> saddle_guesses; // angular midpoints between spatially adjacent sink points
};

struct seed_budget {
    long n_transient = 200000;
    int n_starts = 32;
    double eps = 1e-9;
    std::uint64_t rng_seed = 20240113;
    std::optional<vec2> z0;  // first start; defaults near the nontrivial fixed point
};

/// Find an attracting period-q orbit by simulation and derive seed points for
/// the sink and for the saddles expected between spatially adjacent sink
/// points. Starts are jittered until the requested locking is detected.
template <planar_map_model M>
simulation_seeds seed_from_simulation(const M& m, const param_point& p, int q,
                                      const seed_budget& budget = {})
{
    std::mt19937_64 rng(budget.rng_seed);
    std::uniform_real_distribution<double> jitter(-0.15, 0.15);
    vec2 base = budget.z0.value_or(vec2{std::sqrt(std::max(p.a, 0.0)) + 0.02, p.a + 0.01});

    for (int s = 0; s < budget.n_starts; ++s) {
        vec2 z0 = base;
        if (s > 0) z0 += vec2{jitter(rng), jitter(rng)};
        orbit o = iterate_orbit(m, p, z0, budget.n_transient, 3L * q + 16);
        if (o.diverged) continue;
        auto detected = detect_period(o, q, budget.eps);
        if (!detected || *detected != q) continue;

        simulation_seeds seeds;
        seeds.sink.assign(o.points.end() - q, o.points.end());

        // spatially adjacent sink points: sort by angle about the centroid
        vec2 c{0, 0};
        for (const vec2& z : seeds.sink) c += z;
        c = c / static_cast<double>(q);
        std::vector<vec2> by_angle = seeds.sink;
        std::sort(by_angle.begin(), by_angle.end(), [&](const vec2& a, const vec2& b) {
            return std::atan2(a.y - c.y, a.x - c.x) < std::atan2(b.y - c.y, b.x - c.x);
        });
        for (int i = 0; i < q; ++i) {
            const vec2& a = by_angle[i];
            const vec2& b = by_angle[(i + 1) % q];
            seeds.saddle_guesses.push_back(lerp(a, b, 0.5));
        }
        return seeds;
    }
    throw no_locking_error("no period-" + std::to_string(q) + " locking detected within budget");
}

struct saddle_node_pair {
    periodic_orbit sink;    // attracting orbit (node or focus), or the focus past its Hopf
    periodic_orbit saddle;
};

/// A saddle orbit carried across parameter changes with a consistently
/// oriented unstable direction, so branch "sides" keep their meaning along a
/// tau sweep.
struct tracked_saddle {
    periodic_orbit orbit;
    vec2 v_unstable;
};

template <planar_map_model M>
tracked_saddle make_tracked_saddle(const M&, const periodic_orbit& saddle)
{
    if (saddle.stability != stability_class::saddle)
        throw std::invalid_argument("make_tracked_saddle: orbit is not a saddle");
    vec2 v = canonical_direction(real_eigenvector(saddle.monodromy, saddle.eig.first.real()));
    return {saddle, v};
}

/// March the saddle to new parameters in capped tau steps, keeping the
/// unstable direction aligned with the previous one.
template <planar_map_model M>
void march_saddle(const M& m, tracked_saddle& ts, const param_point& p_to,
                  double max_step = 2.5e-4)
{
    double a_from = ts.orbit.params.a, tau_from = ts.orbit.params.tau;
    int n = std::max(1, static_cast<int>(std::ceil(
                            std::max(std::abs(p_to.tau - tau_from), std::abs(p_to.a - a_from)) /
                            max_step)));
    for (int i = 1; i <= n; ++i) {
        double f = static_cast<double>(i) / n;
        param_point p{a_from + f * (p_to.a - a_from), tau_from + f * (p_to.tau - tau_from)};
        ts.orbit = continue_orbit(m, ts.orbit, p);
        if (ts.orbit.stability != stability_class::saddle)
            throw tracking_error("march_saddle: orbit lost saddle type during continuation");
        vec2 v = real_eigenvector(ts.orbit.monodromy, ts.orbit.eig.first.real());
        if (dot(v, ts.v_unstable) < 0.0) v = v * -1.0;
        ts.v_unstable = v;
    }
}

/// Resolve the coexisting attracting and saddle period-q orbits from
/// simulation seeds.
template <planar_map_model M>
saddle_node_pair find_saddle_node_pair(const M& m, const param_point& p, int q,
                                       const seed_budget& budget = {})
{
    simulation_seeds seeds = seed_from_simulation(m, p, q, budget);
    saddle_node_pair out;
    out.sink = refine_periodic(m, p, q, seeds.sink[0]);

    for (const vec2& g : seeds.saddle_guesses) {
        periodic_orbit cand;
        try {
            cand = refine_periodic(m, p, q, g);
        } catch (const std::exception&) {
            continue;
        }
        if (cand.stability != stability_class::saddle) continue;
        // must be a genuinely different orbit
        double dmin = std::numeric_limits<double>::infinity();
        for (const vec2& zp : out.sink.points) dmin = std::min(dmin, dist(zp, cand.points[0]));
        if (dmin < 1e-9) continue;
        out.saddle = cand;
        return out;
    }
    throw no_convergence_error(0, "no saddle orbit found from simulation seeds");
}

} // namespace hornatlas
