#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace hornatlas {

struct vec2 {
    double x = 0.0;
    double y = 0.0;

    vec2() = default;
    vec2(double x_, double y_) : x(x_), y(y_) {}

    vec2 operator+(const vec2& o) const { return {x + o.x, y + o.y}; }
    vec2 operator-(const vec2& o) const { return {x - o.x, y - o.y}; }
    vec2 operator*(double s) const { return {x * s, y * s}; }
    vec2 operator/(double s) const { return {x / s, y / s}; }
    vec2& operator+=(const vec2& o) { x += o.x; y += o.y; return *this; }
    vec2& operator-=(const vec2& o) { x -= o.x; y -= o.y; return *this; }
    bool operator==(const vec2& o) const { return x == o.x && y == o.y; }
};

inline vec2 operator*(double s, const vec2& v) { return v * s; }

using phase_point = vec2;
using polyline = std::vector<vec2>;

inline double dot(const vec2& a, const vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const vec2& a, const vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm2(const vec2& a) { return dot(a, a); }
inline double norm(const vec2& a) { return std::sqrt(norm2(a)); }
inline double dist(const vec2& a, const vec2& b) { return norm(a - b); }
inline bool finite(const vec2& a) { return std::isfinite(a.x) && std::isfinite(a.y); }

inline vec2 normalized(const vec2& a)
{
    double n = norm(a);
    return n > 0.0 ? a / n : vec2{0.0, 0.0};
}

inline vec2 lerp(const vec2& a, const vec2& b, double t)
{
    return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
}

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a)
{
    const double two_pi = 2.0 * M_PI;
    a = std::fmod(a, two_pi);
    if (a <= -M_PI) a += two_pi;
    if (a > M_PI) a -= two_pi;
    return a;
}

/// Angle between the *lines* spanned by two directions, in degrees, in [0, 90].
inline double line_angle_deg(const vec2& u, const vec2& v)
{
    double c = std::abs(cross(u, v));
    double d = std::abs(dot(u, v));
    return std::atan2(c, d) * 180.0 / M_PI;
}

/// Signed angle from tangent t to direction v, folded to (-90, 90] degrees
/// (directions are treated as unoriented lines).
inline double signed_line_angle_deg(const vec2& t, const vec2& v)
{
    double a = std::atan2(cross(t, v), dot(t, v)) * 180.0 / M_PI;
    if (a > 90.0) a -= 180.0;
    if (a <= -90.0) a += 180.0;
    return a;
}

struct box2 {
    double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
    bool contains(const vec2& p) const
    {
        return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
    }
    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
    bool valid() const
    {
        return std::isfinite(xmin) && std::isfinite(xmax) && std::isfinite(ymin) &&
               std::isfinite(ymax) && xmax > xmin && ymax > ymin;
    }
};

/// Proper intersection of segments [p0,p1] and [q0,q1]. Collinear overlaps and
/// shared endpoints are not reported.
inline std::optional<vec2> segment_intersection(const vec2& p0, const vec2& p1,
                                                const vec2& q0, const vec2& q1)
{
    vec2 r = p1 - p0;
    vec2 s = q1 - q0;
    double denom = cross(r, s);
    if (denom == 0.0) return std::nullopt;
    vec2 qp = q0 - p0;
    double t = cross(qp, s) / denom;
    double u = cross(qp, r) / denom;
    if (t <= 0.0 || t >= 1.0 || u <= 0.0 || u >= 1.0) return std::nullopt;
    return p0 + r * t;
}

inline double point_segment_distance(const vec2& p, const vec2& a, const vec2& b)
{
    vec2 ab = b - a;
    double len2 = norm2(ab);
    if (len2 == 0.0) return dist(p, a);
    double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return dist(p, a + ab * t);
}

inline double polyline_length(const polyline& pl)
{
    double s = 0.0;
    for (std::size_t i = 1; i < pl.size(); ++i) s += dist(pl[i - 1], pl[i]);
    return s;
}

/// Winding number of a closed polyline about p (last vertex joins back to the
/// first implicitly if they differ).
inline int winding_number(const polyline& poly, const vec2& p)
{
    int w = 0;
    std::size_t n = poly.size();
    if (n < 3) return 0;
    for (std::size_t i = 0; i < n; ++i) {
        const vec2& a = poly[i];
        const vec2& b = poly[(i + 1) % n];
        if (a.y <= p.y) {
            if (b.y > p.y && cross(b - a, p - a) > 0.0) ++w;
        } else {
            if (b.y <= p.y && cross(b - a, p - a) < 0.0) --w;
        }
    }
    return w;
}

inline bool point_in_polygon(const polyline& poly, const vec2& p)
{
    return winding_number(poly, p) != 0;
}

/// Distance from p to the nearest segment of a polyline, with the segment index.
struct polyline_proximity {
    double distance;
    std::size_t segment;
};

inline polyline_proximity distance_to_polyline(const vec2& p, const polyline& pl)
{
    polyline_proximity best{std::numeric_limits<double>::infinity(), 0};
    for (std::size_t i = 0; i + 1 < pl.size(); ++i) {
        double d = point_segment_distance(p, pl[i], pl[i + 1]);
        if (d < best.distance) best = {d, i};
    }
    return best;
}

/// Uniform hash grid over 2d points for radius queries.
class point_grid {
public:
    point_grid() = default;

    point_grid(const std::vector<vec2>& pts, double cell) : cell_(cell), pts_(pts)
    {
        buckets_.reserve(pts.size() * 2);
        for (std::size_t i = 0; i < pts_.size(); ++i)
            buckets_.push_back({key(pts_[i]), i});
        std::sort(buckets_.begin(), buckets_.end());
    }

    bool any_within(const vec2& p, double r) const
    {
        if (pts_.empty()) return false;
        double r2 = r * r;
        long cx = cell_index(p.x), cy = cell_index(p.y);
        long span = static_cast<long>(std::ceil(r / cell_));
        for (long dx = -span; dx <= span; ++dx)
            for (long dy = -span; dy <= span; ++dy) {
                auto [lo, hi] = bucket_range(pack(cx + dx, cy + dy));
                for (auto it = lo; it != hi; ++it)
                    if (norm2(p - pts_[it->second]) <= r2) return true;
            }
        return false;
    }

    bool empty() const { return pts_.empty(); }

private:
    using entry = std::pair<long long, std::size_t>;

    long cell_index(double v) const { return static_cast<long>(std::floor(v / cell_)); }
    long long pack(long cx, long cy) const
    {
        return (static_cast<long long>(cx) << 32) ^ (static_cast<long long>(cy) & 0xffffffffLL);
    }
    long long key(const vec2& p) const { return pack(cell_index(p.x), cell_index(p.y)); }

    std::pair<std::vector<entry>::const_iterator, std::vector<entry>::const_iterator>
    bucket_range(long long k) const
    {
        return std::equal_range(buckets_.begin(), buckets_.end(), entry{k, 0},
                                [](const entry& a, const entry& b) { return a.first < b.first; });
    }

    double cell_ = 1.0;
    std::vector<vec2> pts_;
    std::vector<entry> buckets_;
};

} // namespace hornatlas
