#pragma once

#include <numeric>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "map.hpp"

namespace hornatlas {

struct orbit {
    param_point params;
    std::vector<vec2> points;
    long transient_dropped = 0;
    bool diverged = false;
    long diverged_at_step = -1;  // absolute step index, transient included
};

/// Iterate from z0, drop n_transient points, keep n_keep. Divergence stops the
/// orbit and is recorded rather than thrown.
template <planar_map_model M>
orbit iterate_orbit(const M& m, const param_point& p, vec2 z0, long n_transient, long n_keep)
{
    if (n_transient < 0 || n_keep < 0)
        throw std::invalid_argument("iterate_orbit: negative count");
    orbit o;
    o.params = p;
    o.transient_dropped = n_transient;
    vec2 z = z0;
    for (long i = 0; i < n_transient; ++i) {
        z = m.step_unchecked(p, z);
        if (escaped(z)) {
            o.diverged = true;
            o.diverged_at_step = i + 1;
            return o;
        }
    }
    o.points.reserve(static_cast<std::size_t>(n_keep));
    for (long i = 0; i < n_keep; ++i) {
        o.points.push_back(z);
        z = m.step_unchecked(p, z);
        if (escaped(z)) {
            o.diverged = true;
            o.diverged_at_step = n_transient + i + 1;
            return o;
        }
    }
    return o;
}

/// Both Lyapunov exponents by tangent-vector propagation with a Gram-Schmidt
/// orthonormalization every step, log-space accumulation. Returns (l1, l2)
/// with l1 >= l2.
template <planar_map_model M>
std::pair<double, double> lyapunov(const M& m, const param_point& p, vec2 z0, long n)
{
    if (n <= 0) throw std::invalid_argument("lyapunov: n must be positive");
    vec2 z = z0;
    vec2 u1{1.0, 0.0}, u2{0.0, 1.0};
    double s1 = 0.0, s2 = 0.0;
    for (long i = 0; i < n; ++i) {
        jacobian2 J = m.jacobian(p, z);
        z = m.step_unchecked(p, z);
        if (escaped(z)) throw divergence_error{i + 1};
        u1 = J.apply(u1);
        u2 = J.apply(u2);
        double r1 = norm(u1);
        u1 = u1 / r1;
        u2 = u2 - u1 * dot(u2, u1);
        double r2 = norm(u2);
        u2 = u2 / r2;
        s1 += std::log(r1);
        s2 += std::log(r2);
    }
    double l1 = s1 / static_cast<double>(n);
    double l2 = s2 / static_cast<double>(n);
    if (l1 < l2) std::swap(l1, l2);
    return {l1, l2};
}

/// Rotation number about a center (defaults to the nontrivial fixed point
/// (sqrt(a), a)): mean lifted-angle increment over 2 pi, reduced to [0, 1).
template <planar_map_model M>
double rotation_number(const M&, const orbit& o, std::optional<vec2> center = std::nullopt,
                       double eps_center = 1e-9)
{
    if (o.points.size() < 2) throw std::invalid_argument("rotation_number: orbit too short");
    vec2 c = center.value_or(vec2{std::sqrt(o.params.a), o.params.a});
    double total = 0.0;
    double prev = 0.0;
    for (std::size_t i = 0; i < o.points.size(); ++i) {
        vec2 d = o.points[i] - c;
        if (norm(d) < eps_center)
            throw std::invalid_argument("rotation_number: orbit passes through the center");
        double th = std::atan2(d.y, d.x);
        if (i > 0) total += wrap_angle(th - prev);
        prev = th;
    }
    double rho = total / (2.0 * M_PI * static_cast<double>(o.points.size() - 1));
    rho -= std::floor(rho);
    return rho;
}

/// Minimal q <= q_max such that |z_{k+q} - z_k| < eps holds for every k in the
/// final third of the orbit.
inline std::optional<int> detect_period(const orbit& o, int q_max, double eps = 1e-8)
{
    long n = static_cast<long>(o.points.size());
    if (q_max < 1 || n < 3L * q_max) return std::nullopt;
    long third = n / 3;
    for (int q = 1; q <= q_max; ++q) {
        bool ok = true;
        for (long k = n - third; k < n - q; ++k) {
            if (dist(o.points[k], o.points[k + q]) >= eps) {
                ok = false;
                break;
            }
        }
        if (ok) return q;
    }
    return std::nullopt;
}

enum class attractor_kind { fixed_point, periodic, circle_like, chaotic_like, diverged };

struct attractor_class {
    attractor_kind kind;
    int q = 0;            // period when kind == periodic (1 for fixed_point)
    double lambda1 = 0.0; // leading Lyapunov exponent when computed
};

struct classify_budget {
    long n_transient = 100000;
    long n_detect = 4096;    // orbit length used for period detection
    int q_max = 1024;
    double eps = 1e-8;
    long n_lyapunov = 1000000;
    double lambda_chaos = 0.005;
};

/// Coarse attractor classification: divergence, then empirical periodicity,
/// then a Lyapunov threshold. The chaos/circle split is a documented
/// heuristic, not a proof.
template <planar_map_model M>
attractor_class classify_attractor(const M& m, const param_point& p, vec2 z0,
                                   const classify_budget& b = {})
{
    orbit o = iterate_orbit(m, p, z0, b.n_transient, std::max<long>(b.n_detect, 3L * b.q_max));
    if (o.diverged) return {attractor_kind::diverged};
    if (auto q = detect_period(o, b.q_max, b.eps)) {
        if (*q == 1) return {attractor_kind::fixed_point, 1};
        return {attractor_kind::periodic, *q};
    }
    double l1 = 0.0;
    try {
        l1 = lyapunov(m, p, o.points.front(), b.n_lyapunov).first;
    } catch (const divergence_error&) {
        return {attractor_kind::diverged};
    }
    if (l1 > b.lambda_chaos) return {attractor_kind::chaotic_like, 0, l1};
    return {attractor_kind::circle_like, 0, l1};
}

/// Order a dense, roughly curve-like point cloud into a closed chain by
/// nearest-neighbor walking over a hash grid. Works for circles that are not
/// star-shaped about any center, as long as the sample spacing is well below
/// the curve's closest self-approach.
inline polyline chain_closed_curve(std::vector<vec2> pts)
{
    if (pts.size() < 3) throw std::invalid_argument("chain_closed_curve: too few points");

    // grid cell from a spacing estimate
    box2 bb{pts[0].x, pts[0].x, pts[0].y, pts[0].y};
    for (const vec2& z : pts) {
        bb.xmin = std::min(bb.xmin, z.x);
        bb.xmax = std::max(bb.xmax, z.x);
        bb.ymin = std::min(bb.ymin, z.y);
        bb.ymax = std::max(bb.ymax, z.y);
    }
    double diag = std::hypot(bb.width(), bb.height());
    double cell = std::max(4.0 * diag / static_cast<double>(pts.size()), 1e-12);

    auto key = [&](const vec2& z) {
        long cx = static_cast<long>(std::floor(z.x / cell));
        long cy = static_cast<long>(std::floor(z.y / cell));
        return (static_cast<long long>(cx) << 32) ^ (static_cast<long long>(cy) & 0xffffffffLL);
    };
    std::unordered_map<long long, std::vector<std::size_t>> grid;
    for (std::size_t i = 0; i < pts.size(); ++i) grid[key(pts[i])].push_back(i);

    std::vector<bool> used(pts.size(), false);
    polyline out;
    out.reserve(pts.size());
    std::size_t cur = 0;
    used[0] = true;
    out.push_back(pts[0]);
    for (std::size_t step = 1; step < pts.size(); ++step) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_i = pts.size();
        long cx = static_cast<long>(std::floor(pts[cur].x / cell));
        long cy = static_cast<long>(std::floor(pts[cur].y / cell));
        for (int ring = 1; ring <= 64 && best_i == pts.size(); ring *= 2) {
            for (long dx = -ring; dx <= ring; ++dx)
                for (long dy = -ring; dy <= ring; ++dy) {
                    auto it = grid.find((static_cast<long long>(cx + dx) << 32) ^
                                        (static_cast<long long>(cy + dy) & 0xffffffffLL));
                    if (it == grid.end()) continue;
                    for (std::size_t j : it->second) {
                        if (used[j]) continue;
                        double d = norm2(pts[cur] - pts[j]);
                        if (d < best) {
                            best = d;
                            best_i = j;
                        }
                    }
                }
        }
        if (best_i == pts.size()) break;  // isolated leftovers
        used[best_i] = true;
        out.push_back(pts[best_i]);
        cur = best_i;
    }
    return out;
}

/// Sample an attracting invariant circle and return it as a closed polyline,
/// thinned to at most n_vertices. The first vertex is not repeated at the end.
template <planar_map_model M>
polyline ic_polyline(const M& m, const param_point& p, vec2 z0, long n_transient, long n_keep,
                     std::size_t n_vertices = 4096)
{
    orbit o = iterate_orbit(m, p, z0, n_transient, n_keep);
    if (o.diverged) throw divergence_error{o.diverged_at_step};
    polyline chain = chain_closed_curve(o.points);
    if (chain.size() <= n_vertices) return chain;
    // thin by minimum spacing so sub-spacing transverse scatter cannot fold
    // the decimated polyline back on itself
    double spacing = polyline_length(chain) / static_cast<double>(n_vertices);
    polyline out;
    out.reserve(n_vertices);
    out.push_back(chain[0]);
    for (std::size_t i = 1; i < chain.size(); ++i)
        if (dist(out.back(), chain[i]) >= spacing) out.push_back(chain[i]);
    while (!out.empty() && dist(out.back(), out.front()) < 0.5 * spacing) out.pop_back();
    return out;
}

struct circle_search_ctrl {
    long n_transient = 300000;
    long n_keep = 200000;
    std::size_t n_vertices = 4096;
    int locked_period_limit = 64;  // lockings up to this period disqualify a start
    double check_eps = 1e-6;
    std::optional<vec2> center;    // radial starts are laid out around this point
    int resonance_q = 0;           // > 0: order the sample by the q-fold suborbit
};

/// Circle sample ordered by the dynamics: on an invariant circle the q-fold
/// map is a monotone circle homeomorphism, so the suborbit z, L^q z, L^{2q} z
/// traverses the circle in order. This survives the highly nonuniform
/// sampling of near-resonant circles, where nearest-neighbor chaining breaks
/// on the sparse stretches between the sticky ghost regions.
template <planar_map_model M>
polyline ic_polyline_resonant(const M& m, const param_point& p, vec2 z0, long n_transient,
                              long n_keep, std::size_t n_vertices, int q)
{
    if (q < 1) throw std::invalid_argument("ic_polyline_resonant: q must be >= 1");
    orbit o = iterate_orbit(m, p, z0, n_transient, n_keep);
    if (o.diverged) throw divergence_error{o.diverged_at_step};
    if (static_cast<long>(o.points.size()) < 3 * q)
        throw std::invalid_argument("ic_polyline_resonant: orbit too short");

    vec2 c{0, 0};
    for (const vec2& z : o.points) c += z;
    c = c / static_cast<double>(o.points.size());

    // one suborbit lap gives a coarse ordered skeleton of the circle
    polyline skel;
    skel.reserve(4096);
    double cum = 0.0, prev_th = 0.0;
    for (std::size_t k = 0; k < o.points.size(); k += static_cast<std::size_t>(q)) {
        const vec2& z = o.points[k];
        double th = std::atan2(z.y - c.y, z.x - c.x);
        if (!skel.empty()) cum += wrap_angle(th - prev_th);
        prev_th = th;
        skel.push_back(z);
        if (std::abs(cum) >= 2.0 * M_PI) break;  // one full lap
    }
    if (std::abs(cum) < 2.0 * M_PI || skel.size() < 8)
        throw no_locking_error("ic_polyline_resonant: suborbit did not complete a lap");

    // order the full sample by projection onto the skeleton: (segment index,
    // fraction along the segment). Later laps interleave the first, so this
    // recovers full density where the skeleton is sparse.
    std::vector<std::pair<double, vec2>> keyed;
    keyed.reserve(o.points.size());
    for (const vec2& z : o.points) {
        double best = std::numeric_limits<double>::infinity();
        double key = 0.0;
        for (std::size_t s = 0; s + 1 < skel.size(); ++s) {
            vec2 ab = skel[s + 1] - skel[s];
            double len2 = norm2(ab);
            double t = len2 > 0 ? std::clamp(dot(z - skel[s], ab) / len2, 0.0, 1.0) : 0.0;
            double d = norm2(z - (skel[s] + ab * t));
            if (d < best) {
                best = d;
                key = static_cast<double>(s) + t;
            }
        }
        keyed.push_back({key, z});
    }
    std::sort(keyed.begin(), keyed.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    polyline ordered;
    ordered.reserve(keyed.size());
    for (auto& [k, z] : keyed) ordered.push_back(z);

    double spacing = polyline_length(skel) / static_cast<double>(n_vertices);
    polyline out;
    out.push_back(ordered[0]);
    for (std::size_t i = 1; i < ordered.size(); ++i)
        if (dist(out.back(), ordered[i]) >= spacing) out.push_back(ordered[i]);
    while (!out.empty() && dist(out.back(), out.front()) < 0.5 * spacing) out.pop_back();
    return out;
}

namespace detail {

/// Candidate starts on radial rays around a center.
inline std::vector<vec2> circle_start_grid(const vec2& c)
{
    std::vector<vec2> starts;
    starts.push_back(c + vec2{0.01, 0.01});
    for (double r : {0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35})
        for (int k = 0; k < 8; ++k) {
            double th = 2.0 * M_PI * k / 8.0;
            starts.push_back(c + vec2{r * std::cos(th), r * std::sin(th)});
        }
    return starts;
}

/// Screens an orbit sample for circle-likeness: bounded, not visibly
/// periodic, and filling a one-dimensional curve rather than a handful of
/// clusters (a not-yet-converged periodic transient fails the occupancy
/// test).
inline bool circle_like_sample(const orbit& chk, int locked_period_limit, double check_eps)
{
    if (chk.diverged || chk.points.size() < 512) return false;
    if (detect_period(chk, locked_period_limit, check_eps)) return false;
    box2 bb{chk.points[0].x, chk.points[0].x, chk.points[0].y, chk.points[0].y};
    for (const vec2& z : chk.points) {
        bb.xmin = std::min(bb.xmin, z.x);
        bb.xmax = std::max(bb.xmax, z.x);
        bb.ymin = std::min(bb.ymin, z.y);
        bb.ymax = std::max(bb.ymax, z.y);
    }
    double diag = std::max(bb.width(), bb.height());
    if (diag < 1e-4) return false;
    std::unordered_set<long long> cells;
    double cell = diag / 64.0;
    for (const vec2& z : chk.points) {
        long cx = static_cast<long>(std::floor((z.x - bb.xmin) / cell));
        long cy = static_cast<long>(std::floor((z.y - bb.ymin) / cell));
        cells.insert((static_cast<long long>(cx) << 32) ^ cy);
    }
    return cells.size() >= 96;
}

} // namespace detail

/// A start whose orbit looks like an attracting circle. Coexisting periodic
/// sinks and slow periodic transients make single-start sampling unreliable,
/// hence the search and the sample screening.
template <planar_map_model M>
vec2 find_circle_start(const M& m, const param_point& p, const circle_search_ctrl& ctrl = {})
{
    vec2 c = ctrl.center.value_or(vec2{std::sqrt(std::max(p.a, 0.0)), p.a});
    for (const vec2& z0 : detail::circle_start_grid(c)) {
        orbit chk = iterate_orbit(m, p, z0, ctrl.n_transient,
                                  std::max<long>(4000, 3L * ctrl.locked_period_limit));
        if (detail::circle_like_sample(chk, ctrl.locked_period_limit, ctrl.check_eps)) return z0;
    }
    throw no_locking_error("find_circle_start: no attracting circle found from any start");
}

/// Verified circle sample: try starts until one yields an ordered polyline
/// that closes on itself.
template <planar_map_model M>
polyline find_invariant_circle(const M& m, const param_point& p,
                               const circle_search_ctrl& ctrl = {})
{
    vec2 c = ctrl.center.value_or(vec2{std::sqrt(std::max(p.a, 0.0)), p.a});
    for (const vec2& z0 : detail::circle_start_grid(c)) {
        orbit chk = iterate_orbit(m, p, z0, ctrl.n_transient,
                                  std::max<long>(4000, 3L * ctrl.locked_period_limit));
        if (!detail::circle_like_sample(chk, ctrl.locked_period_limit, ctrl.check_eps)) continue;
        polyline ic;
        try {
            if (ctrl.resonance_q > 0)
                ic = ic_polyline_resonant(m, p, z0, ctrl.n_transient, ctrl.n_keep,
                                          ctrl.n_vertices, ctrl.resonance_q);
            else
                ic = ic_polyline(m, p, z0, ctrl.n_transient, ctrl.n_keep, ctrl.n_vertices);
        } catch (const std::exception&) {
            continue;
        }
        if (ic.size() < 16) continue;
        double spacing = polyline_length(ic) / static_cast<double>(ic.size());
        if (spacing <= 0 || dist(ic.front(), ic.back()) > 20.0 * spacing) continue;
        return ic;
    }
    throw no_locking_error("find_invariant_circle: no verified circle from any start");
}

} // namespace hornatlas
