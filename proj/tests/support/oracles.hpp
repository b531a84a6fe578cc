// Independent reference implementations used only by tests. Everything here
// deliberately avoids the library's query paths: distances come from direct
// per-triangle formulas, signs from half-space or axis-ray arguments, FK from
// raw 4x4 matrix products.
#ifndef GRASPKIT_TESTS_ORACLES_HPP
#define GRASPKIT_TESTS_ORACLES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "graspkit/math.hpp"
#include "graspkit/mesh.hpp"

namespace oracles {

using graspkit::TriangleMesh;
using graspkit::Vec3;

// Axis-aligned box SDF centered at the origin with half extents h. For a
// closed box mesh this is the exact point-to-surface signed distance.
inline double box_sdf(const Vec3& p, const Vec3& h) {
    const Vec3 q{std::abs(p.x) - h.x, std::abs(p.y) - h.y, std::abs(p.z) - h.z};
    const Vec3 q_out{std::max(q.x, 0.0), std::max(q.y, 0.0), std::max(q.z, 0.0)};
    const double outside = graspkit::norm(q_out);
    const double inside = std::min(std::max(q.x, std::max(q.y, q.z)), 0.0);
    return outside + inside;
}

// Point-to-segment distance, used by the independent triangle distance.
inline double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const double t = std::clamp(graspkit::dot(p - a, ab) / graspkit::dot(ab, ab), 0.0, 1.0);
    return graspkit::distance(p, a + ab * t);
}

// Unsigned point-triangle distance via plane projection + edge clamping; a
// different formulation from the library's barycentric-region walk.
inline double triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 n = graspkit::cross(b - a, c - a);
    const double nn = graspkit::norm2(n);
    if (nn > 0.0) {
        const double dist_plane = graspkit::dot(p - a, n) / std::sqrt(nn);
        const Vec3 proj = p - n * (graspkit::dot(p - a, n) / nn);
        // Inside test via same-side checks on all three edges.
        const auto same_side = [&](const Vec3& v0, const Vec3& v1, const Vec3& other) {
            const Vec3 edge = v1 - v0;
            const Vec3 c1 = graspkit::cross(edge, proj - v0);
            const Vec3 c2 = graspkit::cross(edge, other - v0);
            return graspkit::dot(c1, c2) >= 0.0;
        };
        if (same_side(a, b, c) && same_side(b, c, a) && same_side(c, a, b))
            return std::abs(dist_plane);
    }
    return std::min({segment_distance(p, a, b), segment_distance(p, b, c),
                     segment_distance(p, c, a)});
}

struct ScanHit {
    double distance = std::numeric_limits<double>::infinity();
    int face = -1;
};

// Exhaustive ascending scan over every triangle; the first minimal face wins,
// which realizes the lowest-index tie rule.
inline ScanHit brute_force_closest(const TriangleMesh& mesh, const Vec3& p) {
    ScanHit best;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& tri = mesh.faces[f];
        const double d = triangle_distance(p, mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                                           mesh.vertices[tri[2]]);
        if (d < best.distance) {
            best.distance = d;
            best.face = static_cast<int>(f);
        }
    }
    return best;
}

// Parity containment along +x with a tiny deterministic tilt; retries a few
// tilts when a crossing lands suspiciously close to an edge.
inline bool brute_force_contains(const TriangleMesh& mesh, const Vec3& p) {
    static const std::array<Vec3, 4> dirs = {{{1.0, 3e-4, 7e-4},
                                              {3e-4, 1.0, -5e-4},
                                              {-7e-4, 5e-4, 1.0},
                                              {0.61, 0.5, 0.613}}};
    for (const auto& raw_dir : dirs) {
        const Vec3 dir = graspkit::normalized(raw_dir);
        int crossings = 0;
        bool suspicious = false;
        for (const auto& tri : mesh.faces) {
            const Vec3 &a = mesh.vertices[tri[0]], &b = mesh.vertices[tri[1]],
                       &c = mesh.vertices[tri[2]];
            const Vec3 e1 = b - a, e2 = c - a;
            const Vec3 pv = graspkit::cross(dir, e2);
            const double det = graspkit::dot(e1, pv);
            if (std::abs(det) < 1e-13) continue;
            const double inv = 1.0 / det;
            const Vec3 tv = p - a;
            const double u = graspkit::dot(tv, pv) * inv;
            const Vec3 qv = graspkit::cross(tv, e1);
            const double v = graspkit::dot(dir, qv) * inv;
            const double t = graspkit::dot(e2, qv) * inv;
            const double w = 1.0 - u - v;
            if (u < -1e-9 || v < -1e-9 || w < -1e-9 || t <= 0.0) continue;
            if (u < 1e-9 || v < 1e-9 || w < 1e-9) {
                suspicious = true;
                break;
            }
            ++crossings;
        }
        if (!suspicious) return (crossings & 1) != 0;
    }
    return false;
}

// Convex-polyhedron containment: inside iff behind every outward face plane.
// Valid for the icosphere fixture (convex, outward-oriented faces).
inline bool convex_contains(const TriangleMesh& mesh, const Vec3& p, double tol = 0.0) {
    for (const auto& tri : mesh.faces) {
        const Vec3 &a = mesh.vertices[tri[0]], &b = mesh.vertices[tri[1]],
                   &c = mesh.vertices[tri[2]];
        const Vec3 n = graspkit::cross(b - a, c - a);
        if (graspkit::dot(p - a, n) > tol * graspkit::norm(n)) return false;
    }
    return true;
}

// O(n*m) Chamfer distance, non-squared euclidean means, cm.
inline double brute_force_chamfer_cm(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    const auto mean_nn = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
        double sum = 0.0;
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : to) best = std::min(best, graspkit::norm2(p - q));
            sum += std::sqrt(best);
        }
        return sum / double(from.size());
    };
    return 0.5 * (mean_nn(a, b) + mean_nn(b, a)) * 100.0;
}

// --- independent 4x4 homogeneous FK ----------------------------------------

using Mat4 = std::array<std::array<double, 4>, 4>;

inline Mat4 mat4_identity() {
    Mat4 m{};
    for (int i = 0; i < 4; ++i) m[i][i] = 1.0;
    return m;
}

inline Mat4 mat4_mul(const Mat4& a, const Mat4& b) {
    Mat4 r{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double s = 0.0;
            for (int k = 0; k < 4; ++k) s += a[i][k] * b[k][j];
            r[i][j] = s;
        }
    return r;
}

inline Mat4 mat4_from_axis_angle(const Vec3& axis, double angle, const Vec3& t = {0, 0, 0}) {
    Mat4 m = mat4_identity();
    const double c = std::cos(angle), s = std::sin(angle), k = 1.0 - c;
    const Vec3 u = graspkit::normalized(axis);
    m[0][0] = k * u.x * u.x + c;
    m[0][1] = k * u.x * u.y - s * u.z;
    m[0][2] = k * u.x * u.z + s * u.y;
    m[1][0] = k * u.x * u.y + s * u.z;
    m[1][1] = k * u.y * u.y + c;
    m[1][2] = k * u.y * u.z - s * u.x;
    m[2][0] = k * u.x * u.z - s * u.y;
    m[2][1] = k * u.y * u.z + s * u.x;
    m[2][2] = k * u.z * u.z + c;
    m[0][3] = t.x;
    m[1][3] = t.y;
    m[2][3] = t.z;
    return m;
}

inline Mat4 mat4_translation(const Vec3& t) {
    Mat4 m = mat4_identity();
    m[0][3] = t.x;
    m[1][3] = t.y;
    m[2][3] = t.z;
    return m;
}

inline Vec3 mat4_apply(const Mat4& m, const Vec3& p) {
    return {m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z + m[0][3],
            m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z + m[1][3],
            m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z + m[2][3]};
}

// --- chi-squared survival function -----------------------------------------

// Regularized upper incomplete gamma Q(a, x) via series / continued fraction
// (Numerical Recipes style), good to ~1e-10 for the a used here.
inline double gammq(double a, double x) {
    const auto gln = std::lgamma(a);
    if (x < a + 1.0) {
        // series for P(a,x)
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-14) break;
        }
        const double p = sum * std::exp(-x + a * std::log(x) - gln);
        return 1.0 - p;
    }
    // continued fraction for Q(a,x)
    double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-14) break;
    }
    return std::exp(-x + a * std::log(x) - gln) * h;
}

// p-value of a chi-squared statistic with k degrees of freedom.
inline double chi_squared_p_value(double statistic, double dof) {
    return gammq(dof / 2.0, statistic / 2.0);
}

}  // namespace oracles

#endif
