// Shared test fixtures: canonical meshes, toy hand specs, temp-dir plumbing.
#ifndef GRASPKIT_TESTS_FIXTURES_HPP
#define GRASPKIT_TESTS_FIXTURES_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "graspkit/math.hpp"
#include "graspkit/mesh.hpp"

#ifndef GRASPKIT_SOURCE_DIR
#define GRASPKIT_SOURCE_DIR "."
#endif

namespace fixtures {

using graspkit::TriangleMesh;
using graspkit::Vec3;

inline std::string source_dir() { return GRASPKIT_SOURCE_DIR; }

inline std::string bundled_hand_path(const std::string& name) {
    return source_dir() + "/data/hands/" + name + ".json";
}

inline std::string bundled_templates_path() {
    return source_dir() + "/data/templates/basic.json";
}

// Axis-aligned cube centered at the origin, outward-oriented, 8 verts and 12
// faces in a fixed order: bottom, top, front(-y), back(+y), left(-x),
// right(+x), two triangles each.
inline std::string cube_obj_text(double half = 0.5, Vec3 center = {0, 0, 0}) {
    const double c[3] = {center.x, center.y, center.z};
    char buf[4096];
    std::snprintf(buf, sizeof(buf),
                  "v %.9f %.9f %.9f\n"   // 1: ---
                  "v %.9f %.9f %.9f\n"   // 2: +--
                  "v %.9f %.9f %.9f\n"   // 3: ++-
                  "v %.9f %.9f %.9f\n"   // 4: -+-
                  "v %.9f %.9f %.9f\n"   // 5: --+
                  "v %.9f %.9f %.9f\n"   // 6: +-+
                  "v %.9f %.9f %.9f\n"   // 7: +++
                  "v %.9f %.9f %.9f\n"   // 8: -++
                  "f 1 4 3\nf 1 3 2\n"   // bottom
                  "f 5 6 7\nf 5 7 8\n"   // top
                  "f 1 2 6\nf 1 6 5\n"   // front (-y)
                  "f 3 4 8\nf 3 8 7\n"   // back (+y)
                  "f 1 5 8\nf 1 8 4\n"   // left (-x)
                  "f 2 3 7\nf 2 7 6\n",  // right (+x)
                  c[0] - half, c[1] - half, c[2] - half, c[0] + half, c[1] - half, c[2] - half,
                  c[0] + half, c[1] + half, c[2] - half, c[0] - half, c[1] + half, c[2] - half,
                  c[0] - half, c[1] - half, c[2] + half, c[0] + half, c[1] - half, c[2] + half,
                  c[0] + half, c[1] + half, c[2] + half, c[0] - half, c[1] + half, c[2] + half);
    return buf;
}

inline TriangleMesh cube_mesh(double half = 0.5, Vec3 center = {0, 0, 0}) {
    return graspkit::load_mesh_from_string(cube_obj_text(half, center));
}

// Two-part labels for the 12-face cube: faces 0..5 one part, 6..11 another.
inline std::string cube_labels_json(const std::string& part_a = "body",
                                    const std::string& part_b = "lid") {
    return "{\"parts\": {\"1\": \"" + part_a + "\", \"2\": \"" + part_b +
           "\"}, \"face_labels\": [1,1,1,1,1,1,2,2,2,2,2,2]}";
}

// Icosphere of the given radius: subdivided icosahedron, vertices pushed onto
// the sphere. Convex, watertight, outward-oriented.
inline TriangleMesh icosphere_mesh(double radius = 0.5, int subdivisions = 2) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                               {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                               {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
    for (auto& v : verts) v = graspkit::normalized(v) * radius;
    std::vector<std::array<int, 3>> faces = {
        {0, 11, 5}, {0, 5, 1},   {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4},  {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},   {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11},  {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        const auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            const Vec3 m = graspkit::normalized((verts[a] + verts[b]) * 0.5) * radius;
            verts.push_back(m);
            const int idx = static_cast<int>(verts.size()) - 1;
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
    TriangleMesh mesh;
    mesh.vertices = std::move(verts);
    mesh.faces = std::move(faces);
    return mesh;
}

// Minimal one-revolute hand: palm at the wrist, one finger link whose points
// rotate about z.
inline std::string twolink_hand_json() {
    return R"JSON({
  "name": "twolink",
  "display_name": "Two-Link Hand",
  "class": "gripper",
  "dof": 1,
  "joints": [
    {"name": "j0", "parent_link": "palm", "child_link": "tip", "type": "revolute",
     "axis": [0, 0, 1], "origin": {"xyz": [0, 0, 0]}, "limits": [-3.1415926535897932, 3.1415926535897932]}
  ],
  "links": [
    {"name": "palm", "finger": "palm", "sample_points": [[0, 0, 0]]},
    {"name": "tip", "finger": "index", "sample_points": [[1, 0, 0]]}
  ]
})JSON";
}

// Two-revolute serial chain for FK oracle comparisons.
inline std::string chain2_hand_json() {
    return R"JSON({
  "name": "chain2",
  "display_name": "Two-Joint Chain",
  "class": "gripper",
  "dof": 2,
  "joints": [
    {"name": "j0", "parent_link": "base", "child_link": "upper", "type": "revolute",
     "axis": [0, 0, 1], "origin": {"xyz": [0.05, 0.01, 0.02], "rpy": [0.1, -0.2, 0.3]},
     "limits": [-3.0, 3.0]},
    {"name": "j1", "parent_link": "upper", "child_link": "lower", "type": "revolute",
     "axis": [0, 1, 0], "origin": {"xyz": [0.08, 0.0, 0.0], "rpy": [0.0, 0.4, -0.1]},
     "limits": [-3.0, 3.0]}
  ],
  "links": [
    {"name": "base", "finger": "palm", "sample_points": [[0, 0, 0], [0.01, 0.02, 0.03]]},
    {"name": "upper", "finger": "index", "sample_points": [[0.03, 0, 0], [0.03, 0.01, -0.02]]},
    {"name": "lower", "finger": "index", "sample_points": [[0.02, 0, 0], [0.0, 0.015, 0.01]]}
  ]
})JSON";
}

// Two-finger probe hand used by contact fixtures: each finger is a single
// link with one sample point at its link origin, so world point == wrist
// transform applied to the joint origin at theta = 0.
inline std::string probe_hand_json() {
    return R"JSON({
  "name": "probe",
  "display_name": "Probe Hand",
  "class": "gripper",
  "dof": 2,
  "joints": [
    {"name": "j_a", "parent_link": "palm", "child_link": "finger_a_link", "type": "revolute",
     "axis": [0, 0, 1], "origin": {"xyz": [0.0, 0.0, 0.05]}, "limits": [-1.0, 1.0]},
    {"name": "j_b", "parent_link": "palm", "child_link": "finger_b_link", "type": "revolute",
     "axis": [0, 0, 1], "origin": {"xyz": [0.0, 0.0, -0.05]}, "limits": [-1.0, 1.0]}
  ],
  "links": [
    {"name": "palm", "finger": "palm", "sample_points": []},
    {"name": "finger_a_link", "finger": "index", "sample_points": [[0, 0, 0]]},
    {"name": "finger_b_link", "finger": "thumb", "sample_points": [[0, 0, 0]]}
  ]
})JSON";
}

// Unique scratch directory under the system temp root, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        namespace fs = std::filesystem;
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("graspkit_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string str() const { return path_.string(); }
    std::filesystem::path path() const { return path_; }

    std::string write(const std::string& relative, const std::string& content) const {
        const auto target = path_ / relative;
        std::filesystem::create_directories(target.parent_path());
        std::ofstream out(target);
        out << content;
        return target.string();
    }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace fixtures

#endif
