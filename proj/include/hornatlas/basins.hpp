#pragma once

#include "critical.hpp"
#include "parallel.hpp"
#include "periodic.hpp"

namespace hornatlas {

/// Attractor list for basin classification: point attractors (periodic
/// orbits) with a capture radius, and optionally an invariant-circle tube.
struct attractor_set {
    struct point_attractor {
        std::vector<vec2> points;
        double capture = 1e-4;
    };
    std::vector<point_attractor> periodic;
    std::optional<polyline> ic_points;  // raw circle samples
    double ic_tube_radius = 1e-3;
};

struct basin_grid {
    static constexpr std::int32_t label_diverged = -1;
    static constexpr std::int32_t label_undecided = -2;

    box2 bounds;
    std::size_t nx = 0, ny = 0;
    std::vector<std::int32_t> labels;  // row-major, y fastest index is x

    std::int32_t at(std::size_t i, std::size_t j) const { return labels[j * nx + i]; }
    vec2 cell_center(std::size_t i, std::size_t j) const
    {
        return {bounds.xmin + bounds.width() * (static_cast<double>(i) + 0.5) / static_cast<double>(nx),
                bounds.ymin + bounds.height() * (static_cast<double>(j) + 0.5) / static_cast<double>(ny)};
    }
};

/// Classify every cell center by forward iteration: first attractor whose
/// capture region the orbit enters wins. The IC tube, when present, gets the
/// label after the periodic attractors. Cells are independent; rows run in
/// parallel.
template <planar_map_model M>
basin_grid basin_compute(const M& m, const param_point& p, const box2& bb, std::size_t nx,
                         std::size_t ny, const attractor_set& attractors, long max_iter = 2000,
                         double escape_r = 100.0)
{
    if (!bb.valid() || nx == 0 || ny == 0) throw std::invalid_argument("basin_compute: bad grid");
    basin_grid grid;
    grid.bounds = bb;
    grid.nx = nx;
    grid.ny = ny;
    grid.labels.assign(nx * ny, basin_grid::label_undecided);

    point_grid tube;
    std::int32_t ic_label = static_cast<std::int32_t>(attractors.periodic.size());
    if (attractors.ic_points)
        tube = point_grid(*attractors.ic_points, attractors.ic_tube_radius);

    parallel_for(ny, [&](std::size_t j) {
        for (std::size_t i = 0; i < nx; ++i) {
            vec2 z = grid.cell_center(i, j);
            std::int32_t label = basin_grid::label_undecided;
            for (long it = 0; it < max_iter && label == basin_grid::label_undecided; ++it) {
                for (std::size_t aidx = 0; aidx < attractors.periodic.size(); ++aidx) {
                    const auto& pa = attractors.periodic[aidx];
                    for (const vec2& ap : pa.points) {
                        if (norm2(z - ap) < pa.capture * pa.capture) {
                            label = static_cast<std::int32_t>(aidx);
                            break;
                        }
                    }
                    if (label != basin_grid::label_undecided) break;
                }
                if (label == basin_grid::label_undecided && !tube.empty() &&
                    tube.any_within(z, attractors.ic_tube_radius))
                    label = ic_label;
                if (label != basin_grid::label_undecided) break;
                z = m.step_unchecked(p, z);
                if (!finite(z) || std::abs(z.x) > escape_r || std::abs(z.y) > escape_r) {
                    label = basin_grid::label_diverged;
                    break;
                }
            }
            grid.labels[j * nx + i] = label;
        }
    });
    return grid;
}

/// Number of 4-connected components of the given label.
inline int connected_components(const basin_grid& g, std::int32_t label)
{
    std::vector<bool> seen(g.labels.size(), false);
    int comps = 0;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < g.labels.size(); ++start) {
        if (seen[start] || g.labels[start] != label) continue;
        ++comps;
        stack.push_back(start);
        seen[start] = true;
        while (!stack.empty()) {
            std::size_t idx = stack.back();
            stack.pop_back();
            std::size_t i = idx % g.nx, j = idx / g.nx;
            auto visit = [&](std::size_t ii, std::size_t jj) {
                std::size_t k = jj * g.nx + ii;
                if (!seen[k] && g.labels[k] == label) {
                    seen[k] = true;
                    stack.push_back(k);
                }
            };
            if (i > 0) visit(i - 1, j);
            if (i + 1 < g.nx) visit(i + 1, j);
            if (j > 0) visit(i, j - 1);
            if (j + 1 < g.ny) visit(i, j + 1);
        }
    }
    return comps;
}

/// Shallow tree of rank-k preimages of a local stable segment through a
/// saddle point.
struct preimage_tree {
    polyline root;
    std::vector<std::vector<polyline>> levels;  // levels[k-1] holds the rank-k preimages
    bool truncated = false;
};

template <planar_map_model M>
preimage_tree compute_preimage_tree(const M& m, const param_point& p, const periodic_orbit& saddle,
                                    double seg_len, int depth, std::size_t n_vertices = 257,
                                    std::size_t max_branches = 4096)
{
    if (saddle.stability != stability_class::saddle)
        throw std::invalid_argument("preimage_tree: orbit is not a saddle");
    double ls = saddle.eig.second.real();
    vec2 vs = canonical_direction(real_eigenvector(saddle.monodromy, ls));

    preimage_tree tree;
    tree.root.reserve(n_vertices);
    for (std::size_t i = 0; i < n_vertices; ++i) {
        double t = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n_vertices - 1);
        tree.root.push_back(saddle.points[0] + vs * (0.5 * seg_len * t));
    }

    std::vector<polyline> current{tree.root};
    for (int level = 1; level <= depth; ++level) {
        std::vector<polyline> next;
        for (const polyline& pl : current) {
            auto branches = polyline_preimages(m, p, pl);
            for (auto& b : branches) {
                if (b.size() >= 2) next.push_back(std::move(b));
                if (next.size() > max_branches) {
                    tree.truncated = true;
                    break;
                }
            }
            if (tree.truncated) break;
        }
        tree.levels.push_back(next);
        if (tree.truncated) break;
        current = std::move(next);
    }
    return tree;
}

/// Self-intersection census of a closed polyline (used to validate circle
/// inputs before point-in-polygon counting).
inline std::vector<vec2> closed_polyline_self_intersections(const polyline& pl)
{
    std::vector<vec2> hits;
    std::size_t n = pl.size();
    if (n < 4) return hits;
    auto seg = [&](std::size_t i) {
        return std::pair<vec2, vec2>{pl[i], pl[(i + 1) % n]};
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 2; j < n; ++j) {
            if (i == 0 && j == n - 1) continue;  // adjacent through the closure
            auto [a0, a1] = seg(i);
            auto [b0, b1] = seg(j);
            if (auto h = segment_intersection(a0, a1, b0, b1)) hits.push_back(*h);
        }
    }
    return hits;
}

/// Winding-number counts of points inside/outside a simple closed polyline.
inline std::pair<int, int> inside_outside(const polyline& ic, const std::vector<vec2>& points)
{
    if (ic.size() < 3) throw std::invalid_argument("inside_outside: circle too short");
    if (!closed_polyline_self_intersections(ic).empty())
        throw std::invalid_argument("inside_outside: circle is not simple");
    int in = 0, out = 0;
    for (const vec2& z : points)
        (point_in_polygon(ic, z) ? in : out)++;
    return {in, out};
}

struct left_count_result {
    int count = 0;
    std::vector<std::size_t> boundary;  // indices of points within 1e-10 of the critical set
};

/// Count points lying left of the right-hand branch of the rank-0 critical
/// parabola at their height (the sign region reached by moving far left).
template <planar_map_model M>
    requires requires(const M m, param_point p, double y) { m.critical_parabola_x_right(p, y); }
left_count_result left_of_critical_count(const M& m, const param_point& p,
                                         const std::vector<vec2>& points)
{
    left_count_result r;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (std::abs(m.det_jacobian(p, points[i])) < 1e-10) r.boundary.push_back(i);
        if (points[i].x < m.critical_parabola_x_right(p, points[i].y)) ++r.count;
    }
    return r;
}

} // namespace hornatlas
