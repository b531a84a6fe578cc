#ifndef GRASPKIT_BVH_HPP
#define GRASPKIT_BVH_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

#include "graspkit/math.hpp"
#include "graspkit/mesh.hpp"

namespace graspkit {

// Closest point on triangle (v0,v1,v2) to p. Ericson, Real-Time Collision
// Detection, 5.1.5.
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                      const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = dot(ab, ap), d2 = dot(ac, ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    const Vec3 bp = p - b;
    const double d3 = dot(ab, bp), d4 = dot(ac, bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + ab * (d1 / (d1 - d3));

    const Vec3 cp = p - c;
    const double d5 = dot(ab, cp), d6 = dot(ac, cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + ac * (d2 / (d2 - d6));

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));

    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

struct RayHit {
    bool hit = false;
    bool grazing = false;  // edge/vertex graze or near-parallel: parity unreliable
    double t = 0.0;
};

// Moller-Trumbore. Hits are counted for t > 0 only; u/v/w within `graze_eps`
// of the triangle border are flagged.
inline RayHit ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                           const Vec3& c, double graze_eps = 1e-10) {
    RayHit out;
    const Vec3 e1 = b - a, e2 = c - a;
    const Vec3 pv = cross(dir, e2);
    const double det = dot(e1, pv);
    if (std::abs(det) < 1e-14) {
        // Near-parallel: cannot rule out a grazing pass through this face.
        const Vec3 n = cross(e1, e2);
        const double plane_d = dot(n, origin - a);
        if (std::abs(plane_d) < 1e-12 * norm(n)) out.grazing = true;
        return out;
    }
    const double inv = 1.0 / det;
    const Vec3 tv = origin - a;
    const double u = dot(tv, pv) * inv;
    const Vec3 qv = cross(tv, e1);
    const double v = dot(dir, qv) * inv;
    const double t = dot(e2, qv) * inv;
    const double w = 1.0 - u - v;
    if (u < -graze_eps || v < -graze_eps || w < -graze_eps) return out;
    if (u < graze_eps || v < graze_eps || w < graze_eps) {
        out.grazing = true;
        return out;
    }
    if (t <= 0.0) return out;
    out.hit = true;
    out.t = t;
    return out;
}

struct SignedDistance {
    double value = 0.0;
    int nearest_face = -1;
    bool sign_reliable = true;  // false when the mesh is not watertight
};

struct ClosestHit {
    double distance = std::numeric_limits<double>::infinity();
    int face = -1;
    Vec3 point;
};

// Static AABB tree over mesh triangles. Immutable after construction; all
// queries are const and safe to run concurrently. The source mesh must
// outlive the index.
class DistanceQueryIndex {
public:
    explicit DistanceQueryIndex(const TriangleMesh& mesh) : mesh_(&mesh) {
        const std::size_t n = mesh.faces.size();
        face_order_.resize(n);
        for (std::size_t i = 0; i < n; ++i) face_order_[i] = static_cast<int>(i);
        centroids_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& f = mesh.faces[i];
            centroids_[i] =
                (mesh.vertices[f[0]] + mesh.vertices[f[1]] + mesh.vertices[f[2]]) / 3.0;
        }
        if (n > 0) {
            nodes_.reserve(2 * n);
            build_node(0, n);
        }
        watertight_ = check_watertight();
    }

    const TriangleMesh& mesh() const { return *mesh_; }
    bool watertight() const { return watertight_; }

    // Nearest triangle; ties broken toward the lowest face index, matching an
    // exhaustive ascending scan.
    ClosestHit closest(const Vec3& p) const {
        ClosestHit best;
        if (nodes_.empty()) return best;
        descend(0, p, best);
        return best;
    }

    std::vector<std::pair<double, int>> unsigned_distance_batch(
        const std::vector<Vec3>& points) const {
        std::vector<std::pair<double, int>> out;
        out.reserve(points.size());
        for (const auto& p : points) {
            const ClosestHit h = closest(p);
            out.emplace_back(h.distance, h.face);
        }
        return out;
    }

    // Ray-parity containment. A grazing ray is retried along up to 8 fixed
    // perturbed directions; the first clean parity wins.
    bool contains(const Vec3& p) const {
        if (nodes_.empty()) return false;
        int parity = 0;
        for (int attempt = 0; attempt < int(kRayDirections.size()); ++attempt) {
            bool grazed = false;
            parity = 0;
            count_crossings(0, p, kRayDirections[attempt], parity, grazed);
            if (!grazed) return (parity & 1) != 0;
        }
        // Every direction grazed (pathological); use the last parity anyway.
        return (parity & 1) != 0;
    }

    // Sign convention: points at distance exactly 0 are outside (positive).
    SignedDistance signed_distance(const Vec3& p) const {
        const ClosestHit h = closest(p);
        SignedDistance out;
        out.nearest_face = h.face;
        out.sign_reliable = watertight_;
        if (h.distance == 0.0) {
            out.value = 0.0;
            return out;
        }
        out.value = contains(p) ? -h.distance : h.distance;
        return out;
    }

    std::vector<SignedDistance> signed_distance_batch(const std::vector<Vec3>& points) const {
        std::vector<SignedDistance> out;
        out.reserve(points.size());
        for (const auto& p : points) out.push_back(signed_distance(p));
        return out;
    }

private:
    struct Node {
        Vec3 bmin, bmax;
        int left = -1, right = -1;   // children, -1 on leaves
        int start = 0, count = 0;    // leaf face range within face_order_
    };

    static constexpr std::size_t kLeafSize = 4;

    // Fixed pseudo-random unit directions; none axis-aligned, so rays from
    // axis-aligned fixture meshes rarely graze on the first try.
    static constexpr std::array<Vec3, 8> kRayDirections = {{
        {0.5375823981990145, -0.1497274216795862, 0.8298388154837318},
        {-0.7137442307150544, 0.6358459841962549, 0.2938508992928332},
        {0.1619759505374977, 0.7099604821983256, -0.6853569862898371},
        {-0.2938504859402289, -0.8438527846262189, -0.4491787217838377},
        {0.8475823911990145, 0.3497274216795862, -0.3988388154837318},
        {-0.1375823981990145, 0.4497274216795862, 0.8824618154837318},
        {0.6137442307150544, -0.7358459841962549, 0.2862418992928332},
        {-0.5619759505374977, -0.2099604821983256, 0.8000069862898371},
    }};

    const TriangleMesh* mesh_;
    std::vector<Node> nodes_;
    std::vector<int> face_order_;
    std::vector<Vec3> centroids_;
    bool watertight_ = false;

    void face_bounds(int face, Vec3& lo, Vec3& hi) const {
        const auto& f = mesh_->faces[static_cast<std::size_t>(face)];
        lo = hi = mesh_->vertices[f[0]];
        for (int k = 1; k < 3; ++k) {
            lo = min_elem(lo, mesh_->vertices[f[k]]);
            hi = max_elem(hi, mesh_->vertices[f[k]]);
        }
    }

    int build_node(std::size_t start, std::size_t count) {
        Node node;
        Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
        Vec3 clo{1e300, 1e300, 1e300}, chi{-1e300, -1e300, -1e300};
        for (std::size_t i = start; i < start + count; ++i) {
            Vec3 flo, fhi;
            face_bounds(face_order_[i], flo, fhi);
            lo = min_elem(lo, flo);
            hi = max_elem(hi, fhi);
            const Vec3& c = centroids_[static_cast<std::size_t>(face_order_[i])];
            clo = min_elem(clo, c);
            chi = max_elem(chi, c);
        }
        node.bmin = lo;
        node.bmax = hi;

        const int idx = static_cast<int>(nodes_.size());
        nodes_.push_back(node);

        if (count <= kLeafSize) {
            nodes_[idx].start = static_cast<int>(start);
            nodes_[idx].count = static_cast<int>(count);
            return idx;
        }

        const Vec3 extent = chi - clo;
        int axis = 0;
        if (extent.y > extent.x) axis = 1;
        if (extent.z > extent[axis]) axis = 2;
        if (extent[axis] == 0.0) {  // all centroids coincide, cannot split
            nodes_[idx].start = static_cast<int>(start);
            nodes_[idx].count = static_cast<int>(count);
            return idx;
        }

        const std::size_t mid = start + count / 2;
        std::nth_element(face_order_.begin() + static_cast<long>(start),
                         face_order_.begin() + static_cast<long>(mid),
                         face_order_.begin() + static_cast<long>(start + count),
                         [&](int a, int b) {
                             const double ca = centroids_[static_cast<std::size_t>(a)][axis];
                             const double cb = centroids_[static_cast<std::size_t>(b)][axis];
                             return ca < cb || (ca == cb && a < b);
                         });

        const int l = build_node(start, mid - start);
        const int r = build_node(mid, start + count - mid);
        nodes_[idx].left = l;
        nodes_[idx].right = r;
        return idx;
    }

    static double box_distance2(const Vec3& p, const Vec3& lo, const Vec3& hi) {
        double d2 = 0.0;
        for (int a = 0; a < 3; ++a) {
            const double v = p[a];
            if (v < lo[a]) d2 += (lo[a] - v) * (lo[a] - v);
            else if (v > hi[a]) d2 += (v - hi[a]) * (v - hi[a]);
        }
        return d2;
    }

    void descend(int ni, const Vec3& p, ClosestHit& best) const {
        const Node& node = nodes_[static_cast<std::size_t>(ni)];
        if (node.left < 0) {
            for (int i = node.start; i < node.start + node.count; ++i) {
                const int face = face_order_[static_cast<std::size_t>(i)];
                const auto& f = mesh_->faces[static_cast<std::size_t>(face)];
                const Vec3 cp = closest_point_on_triangle(p, mesh_->vertices[f[0]],
                                                          mesh_->vertices[f[1]],
                                                          mesh_->vertices[f[2]]);
                const double d = distance(p, cp);
                if (d < best.distance || (d == best.distance && face < best.face)) {
                    best.distance = d;
                    best.face = face;
                    best.point = cp;
                }
            }
            return;
        }
        const double dl = box_distance2(p, nodes_[node.left].bmin, nodes_[node.left].bmax);
        const double dr = box_distance2(p, nodes_[node.right].bmin, nodes_[node.right].bmax);
        const int first = dl <= dr ? node.left : node.right;
        const int second = dl <= dr ? node.right : node.left;
        const double dfirst = std::min(dl, dr), dsecond = std::max(dl, dr);
        // <= keeps equal-distance boxes visitable so the lowest-face tie rule
        // matches an exhaustive scan.
        if (dfirst <= best.distance * best.distance) descend(first, p, best);
        if (dsecond <= best.distance * best.distance) descend(second, p, best);
    }

    static bool ray_box(const Vec3& o, const Vec3& inv_dir, const Vec3& lo, const Vec3& hi) {
        double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3; ++a) {
            double t0 = (lo[a] - o[a]) * inv_dir[a];
            double t1 = (hi[a] - o[a]) * inv_dir[a];
            if (t0 > t1) std::swap(t0, t1);
            tmin = std::max(tmin, t0);
            tmax = std::min(tmax, t1);
            if (tmin > tmax) return false;
        }
        return true;
    }

    void count_crossings(int ni, const Vec3& origin, const Vec3& dir, int& parity,
                         bool& grazed) const {
        const Node& node = nodes_[static_cast<std::size_t>(ni)];
        const Vec3 inv{1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z};
        if (!ray_box(origin, inv, node.bmin - Vec3{1e-9, 1e-9, 1e-9},
                     node.bmax + Vec3{1e-9, 1e-9, 1e-9}))
            return;
        if (node.left < 0) {
            for (int i = node.start; i < node.start + node.count; ++i) {
                const int face = face_order_[static_cast<std::size_t>(i)];
                const auto& f = mesh_->faces[static_cast<std::size_t>(face)];
                const RayHit h = ray_triangle(origin, dir, mesh_->vertices[f[0]],
                                              mesh_->vertices[f[1]], mesh_->vertices[f[2]]);
                if (h.grazing) grazed = true;
                if (h.hit) parity ^= 1;
            }
            return;
        }
        count_crossings(node.left, origin, dir, parity, grazed);
        count_crossings(node.right, origin, dir, parity, grazed);
    }

    // Closed orientable 2-manifold: every directed edge appears exactly once
    // and is matched by its reverse.
    bool check_watertight() const {
        if (mesh_->faces.empty()) return false;
        std::unordered_map<std::uint64_t, int> directed;
        const auto key = [&](int a, int b) {
            return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
                   static_cast<std::uint32_t>(b);
        };
        for (const auto& f : mesh_->faces) {
            for (int k = 0; k < 3; ++k) {
                const int a = f[k], b = f[(k + 1) % 3];
                if (++directed[key(a, b)] > 1) return false;
            }
        }
        for (const auto& [k, count] : directed) {
            const int a = static_cast<int>(k >> 32);
            const int b = static_cast<int>(k & 0xFFFFFFFFull);
            auto it = directed.find(key(b, a));
            if (it == directed.end() || it->second != 1) return false;
        }
        return true;
    }
};

}  // namespace graspkit

#endif
