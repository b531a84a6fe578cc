#ifndef GRASPKIT_MESH_HPP
#define GRASPKIT_MESH_HPP

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "graspkit/error.hpp"
#include "graspkit/math.hpp"
#include "graspkit/random.hpp"

namespace graspkit {

// Part-labelled triangle mesh, units are meters throughout.
// Faces of an unlabelled mesh all report part 0, named "body".
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    std::vector<int> face_part_labels;  // empty when no labels were supplied
    std::map<int, std::string> part_names;
    int dropped_degenerate_faces = 0;
    int merged_duplicate_vertices = 0;

    bool has_labels() const { return !face_part_labels.empty(); }

    int part_of_face(int face) const {
        return has_labels() ? face_part_labels[static_cast<std::size_t>(face)] : 0;
    }

    std::string part_name(int part) const {
        auto it = part_names.find(part);
        if (it != part_names.end()) return it->second;
        return part == 0 ? "body" : "part_" + std::to_string(part);
    }

    double face_area(int f) const {
        const auto& tri = faces[static_cast<std::size_t>(f)];
        const Vec3 e0 = vertices[tri[1]] - vertices[tri[0]];
        const Vec3 e1 = vertices[tri[2]] - vertices[tri[0]];
        return 0.5 * norm(cross(e0, e1));
    }

    Vec3 face_point(int f, double a, double b, double c) const {
        const auto& tri = faces[static_cast<std::size_t>(f)];
        return vertices[tri[0]] * a + vertices[tri[1]] * b + vertices[tri[2]] * c;
    }

    Vec3 bbox_min() const {
        Vec3 lo{1e300, 1e300, 1e300};
        for (const auto& v : vertices) lo = min_elem(lo, v);
        return lo;
    }
    Vec3 bbox_max() const {
        Vec3 hi{-1e300, -1e300, -1e300};
        for (const auto& v : vertices) hi = max_elem(hi, v);
        return hi;
    }

    // Diameter of the sphere circumscribing the axis-aligned bounding box.
    double bounding_sphere_diameter() const {
        if (vertices.empty()) return 0.0;
        return norm(bbox_max() - bbox_min());
    }
};

namespace detail {

inline std::int64_t quantize_coord(double v) {
    // 1e-9 m merge grid.
    return static_cast<std::int64_t>(std::llround(v * 1e9));
}

struct VertexKey {
    std::int64_t x, y, z;
    bool operator==(const VertexKey& o) const { return x == o.x && y == o.y && z == o.z; }
};

struct VertexKeyHash {
    std::size_t operator()(const VertexKey& k) const {
        std::uint64_t h = fnv1a(&k.x, sizeof(k.x));
        h = fnv1a(&k.y, sizeof(k.y), h);
        h = fnv1a(&k.z, sizeof(k.z), h);
        return static_cast<std::size_t>(h);
    }
};

struct RawObj {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;  // fan-triangulated, pre-cleanup
};

// OBJ subset: `v x y z` and `f i j k ...` records (1-based indices, negative
// indices count from the end, `i/t/n` forms keep the vertex index). Faces
// with more than three indices are fan-triangulated. Other record types are
// ignored. LF and CRLF both accepted.
inline RawObj parse_obj_raw(std::istream& in) {
    RawObj raw;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z)) throw ParseError("malformed vertex record", line_no);
            raw.vertices.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string item;
            while (ls >> item) {
                const auto slash = item.find('/');
                const std::string head =
                    slash == std::string::npos ? item : item.substr(0, slash);
                int v = 0;
                try {
                    std::size_t used = 0;
                    v = std::stoi(head, &used);
                    if (used != head.size()) throw std::invalid_argument(head);
                } catch (const std::exception&) {
                    throw ParseError("malformed face index '" + item + "'", line_no);
                }
                if (v < 0) v = static_cast<int>(raw.vertices.size()) + v + 1;
                if (v < 1 || v > static_cast<int>(raw.vertices.size()))
                    throw ParseError("face index " + std::to_string(v) + " out of range",
                                     line_no);
                idx.push_back(v - 1);
            }
            if (idx.size() < 3) throw ParseError("face with fewer than 3 indices", line_no);
            for (std::size_t k = 2; k < idx.size(); ++k)
                raw.faces.push_back({idx[0], idx[static_cast<int>(k) - 1], idx[k]});
        }
    }
    return raw;
}

inline bool face_is_degenerate(const std::vector<Vec3>& verts, const std::array<int, 3>& f) {
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) return true;
    const Vec3 e0 = verts[f[1]] - verts[f[0]];
    const Vec3 e1 = verts[f[2]] - verts[f[0]];
    return norm(cross(e0, e1)) == 0.0;
}

// Merge duplicate vertices (1e-9 m grid, first occurrence wins), then drop
// degenerate faces. `kept_raw_faces` records which raw faces survived so
// face-indexed sidecar data can follow the cleanup.
inline TriangleMesh cleanup(const RawObj& raw, std::vector<int>& kept_raw_faces) {
    TriangleMesh mesh;
    std::unordered_map<VertexKey, int, VertexKeyHash> seen;
    std::vector<int> remap(raw.vertices.size());
    for (std::size_t i = 0; i < raw.vertices.size(); ++i) {
        const Vec3& v = raw.vertices[i];
        VertexKey key{quantize_coord(v.x), quantize_coord(v.y), quantize_coord(v.z)};
        auto it = seen.find(key);
        if (it == seen.end()) {
            remap[i] = static_cast<int>(mesh.vertices.size());
            seen.emplace(key, remap[i]);
            mesh.vertices.push_back(v);
        } else {
            remap[i] = it->second;
            ++mesh.merged_duplicate_vertices;
        }
    }
    kept_raw_faces.clear();
    for (std::size_t fi = 0; fi < raw.faces.size(); ++fi) {
        std::array<int, 3> f = {remap[raw.faces[fi][0]], remap[raw.faces[fi][1]],
                                remap[raw.faces[fi][2]]};
        if (face_is_degenerate(mesh.vertices, f)) {
            ++mesh.dropped_degenerate_faces;
            continue;
        }
        kept_raw_faces.push_back(static_cast<int>(fi));
        mesh.faces.push_back(f);
    }
    return mesh;
}

}  // namespace detail

// Label JSON: { "parts": {"<id>": "<name>", ...}, "face_labels": [int, ...] }.
// `face_labels` is authored against the raw (pre-cleanup) face list.
inline void apply_labels(TriangleMesh& mesh, const nlohmann::json& doc,
                         const std::vector<int>& kept_raw_faces,
                         std::size_t raw_face_count) {
    if (!doc.is_object() || !doc.contains("parts") || !doc.contains("face_labels"))
        throw SchemaError("label file must contain 'parts' and 'face_labels'");
    std::map<int, std::string> names;
    for (auto it = doc["parts"].begin(); it != doc["parts"].end(); ++it)
        names[std::stoi(it.key())] = it.value().get<std::string>();
    const auto& labels = doc["face_labels"];
    if (labels.size() != raw_face_count)
        throw SchemaError("face_labels length " + std::to_string(labels.size()) +
                          " does not match face count " + std::to_string(raw_face_count));
    std::vector<int> face_labels;
    face_labels.reserve(kept_raw_faces.size());
    for (int raw : kept_raw_faces) {
        const int part = labels[static_cast<std::size_t>(raw)].get<int>();
        if (!names.count(part))
            throw SchemaError("face label " + std::to_string(part) +
                              " has no part-name entry");
        face_labels.push_back(part);
    }
    mesh.face_part_labels = std::move(face_labels);
    mesh.part_names = std::move(names);
}

inline TriangleMesh load_mesh_from_string(const std::string& obj_text,
                                          const std::string& labels_json_text = "") {
    std::istringstream in(obj_text);
    const detail::RawObj raw = detail::parse_obj_raw(in);
    std::vector<int> kept;
    TriangleMesh mesh = detail::cleanup(raw, kept);
    if (!labels_json_text.empty()) {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(labels_json_text);
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(std::string("label JSON parse failure: ") + e.what());
        }
        apply_labels(mesh, doc, kept, raw.faces.size());
    }
    return mesh;
}

inline TriangleMesh load_mesh(const std::string& path, const std::string& labels_path = "") {
    std::ifstream in(path);
    if (!in) throw Error("cannot open mesh file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string labels_text;
    if (!labels_path.empty()) {
        std::ifstream lin(labels_path);
        if (!lin) throw Error("cannot open label file: " + labels_path);
        std::stringstream lbuf;
        lbuf << lin.rdbuf();
        labels_text = lbuf.str();
    }
    return load_mesh_from_string(buf.str(), labels_text);
}

// Area-uniform surface sample: points, the face each came from, and the
// face's part label.
struct SurfaceSampleSet {
    std::vector<Vec3> points;
    std::vector<int> source_face;
    std::vector<int> part_label;
    std::uint64_t seed = 0;
};

// Area-weighted face choice, uniform barycentric placement within the face.
// Identical (mesh, n, seed) reproduce the set exactly.
inline SurfaceSampleSet sample_surface(const TriangleMesh& mesh, std::size_t n,
                                       std::uint64_t seed) {
    if (mesh.faces.empty()) throw Error("cannot sample an empty mesh");
    if (n == 0) throw Error("sample count must be >= 1");

    std::vector<double> cdf(mesh.faces.size());
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        total += mesh.face_area(static_cast<int>(f));
        cdf[f] = total;
    }
    if (total <= 0.0) throw Error("mesh has zero total area");

    SurfaceSampleSet out;
    out.seed = seed;
    out.points.reserve(n);
    out.source_face.reserve(n);
    out.part_label.reserve(n);

    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.next_double() * total;
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        int f = static_cast<int>(
            std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()),
                                  mesh.faces.size() - 1));
        const double r1 = rng.next_double();
        const double r2 = rng.next_double();
        const double s = std::sqrt(r1);
        out.points.push_back(mesh.face_point(f, 1.0 - s, s * (1.0 - r2), s * r2));
        out.source_face.push_back(f);
        out.part_label.push_back(mesh.part_of_face(f));
    }
    return out;
}

}  // namespace graspkit

#endif
