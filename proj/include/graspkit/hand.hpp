#ifndef GRASPKIT_HAND_HPP
#define GRASPKIT_HAND_HPP

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "graspkit/error.hpp"
#include "graspkit/math.hpp"

namespace graspkit {

enum class JointType { Revolute, Prismatic, Fixed };

struct Joint {
    std::string name;
    std::string parent_link;
    std::string child_link;
    JointType type = JointType::Revolute;
    Vec3 axis{0, 0, 1};
    Transform origin;
    double lo = 0.0, hi = 0.0;
    int theta_index = -1;    // independent joints only
    int mimic_source = -1;   // theta index of the driving joint, -1 if independent
    double mimic_ratio = 1.0;
};

struct Link {
    std::string name;
    std::string finger;  // finger name, or "palm"
    std::vector<Vec3> sample_points;  // link frame
};

// Wrist pose [T;R] plus joint angles. R is axis-angle (radians); prismatic
// theta entries are meters.
struct GraspPose {
    std::string hand;
    Vec3 T;
    Vec3 R;
    std::vector<double> theta;
};

// Declarative kinematic hand: a joint tree over named links, each link
// carrying its surface sample points. Immutable once loaded.
struct HandModel {
    std::string name;
    std::string display_name;
    std::string hand_class = "dexterous";  // "dexterous" or "gripper"
    int dof = 0;
    std::vector<Joint> joints;
    std::vector<Link> links;
    int root_link = -1;
    std::vector<int> joint_topo_order;
    std::map<std::string, int> link_index;

    const Link& link(int i) const { return links[static_cast<std::size_t>(i)]; }

    int index_of_link(const std::string& n) const {
        auto it = link_index.find(n);
        return it == link_index.end() ? -1 : it->second;
    }

    std::size_t total_sample_points() const {
        std::size_t n = 0;
        for (const auto& l : links) n += l.sample_points.size();
        return n;
    }

    // Limits indexed by theta position.
    std::pair<double, double> theta_limits(int theta_index) const {
        for (const auto& j : joints)
            if (j.theta_index == theta_index) return {j.lo, j.hi};
        throw Error("theta index out of range: " + std::to_string(theta_index));
    }

    double joint_value(const Joint& j, const std::vector<double>& theta) const {
        if (j.type == JointType::Fixed) return 0.0;
        if (j.mimic_source >= 0)
            return j.mimic_ratio * theta[static_cast<std::size_t>(j.mimic_source)];
        return theta[static_cast<std::size_t>(j.theta_index)];
    }

    void validate_pose(const GraspPose& pose, double limit_slack = 0.0) const {
        if (pose.hand != name)
            throw Error("pose is for hand '" + pose.hand + "', model is '" + name + "'");
        if (static_cast<int>(pose.theta.size()) != dof)
            throw Error("pose has " + std::to_string(pose.theta.size()) +
                        " joint angles, hand '" + name + "' has dof " + std::to_string(dof));
        for (const auto& j : joints) {
            if (j.theta_index < 0) continue;
            const double v = pose.theta[static_cast<std::size_t>(j.theta_index)];
            if (v < j.lo - limit_slack || v > j.hi + limit_slack)
                throw Error("joint '" + j.name + "' value " + std::to_string(v) +
                            " outside limits [" + std::to_string(j.lo) + ", " +
                            std::to_string(j.hi) + "]");
        }
    }
};

namespace detail {

inline Transform parse_origin(const nlohmann::json& j) {
    Transform t;
    if (j.contains("xyz")) {
        const auto& v = j["xyz"];
        t.t = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
    }
    if (j.contains("rpy")) {
        const auto& v = j["rpy"];
        t.R = rpy_to_matrix(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
    }
    return t;
}

}  // namespace detail

inline HandModel parse_hand_spec(const nlohmann::json& doc) {
    HandModel hand;
    if (!doc.contains("name") || !doc.contains("dof") || !doc.contains("joints") ||
        !doc.contains("links"))
        throw SchemaError("hand spec requires 'name', 'dof', 'joints', 'links'");
    hand.name = doc["name"].get<std::string>();
    hand.display_name = doc.value("display_name", hand.name);
    hand.hand_class = doc.value("class", std::string("dexterous"));
    hand.dof = doc["dof"].get<int>();

    for (const auto& lj : doc["links"]) {
        Link link;
        link.name = lj["name"].get<std::string>();
        link.finger = lj.value("finger", std::string());
        if (lj.contains("sample_points"))
            for (const auto& p : lj["sample_points"])
                link.sample_points.emplace_back(p[0].get<double>(), p[1].get<double>(),
                                                p[2].get<double>());
        if (hand.link_index.count(link.name))
            throw SchemaError("duplicate link '" + link.name + "'");
        hand.link_index[link.name] = static_cast<int>(hand.links.size());
        hand.links.push_back(std::move(link));
    }

    std::map<std::string, int> joint_index;
    for (const auto& jj : doc["joints"]) {
        Joint j;
        j.name = jj["name"].get<std::string>();
        j.parent_link = jj["parent_link"].get<std::string>();
        j.child_link = jj["child_link"].get<std::string>();
        const std::string type = jj["type"].get<std::string>();
        if (type == "revolute") j.type = JointType::Revolute;
        else if (type == "prismatic") j.type = JointType::Prismatic;
        else if (type == "fixed") j.type = JointType::Fixed;
        else throw SchemaError("joint '" + j.name + "': unknown type '" + type + "'");
        if (jj.contains("axis")) {
            const auto& a = jj["axis"];
            j.axis = {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
        }
        if (j.type != JointType::Fixed && std::abs(norm(j.axis) - 1.0) > 1e-9)
            throw SchemaError("joint '" + j.name + "': axis is not unit length");
        if (jj.contains("origin")) j.origin = detail::parse_origin(jj["origin"]);
        if (jj.contains("limits")) {
            const auto& l = jj["limits"];
            j.lo = l[0].get<double>();
            j.hi = l[1].get<double>();
            if (j.type != JointType::Fixed && !(j.lo < j.hi))
                throw SchemaError("joint '" + j.name + "': limits must satisfy lo < hi");
        } else if (j.type != JointType::Fixed) {
            throw SchemaError("joint '" + j.name + "': non-fixed joint requires limits");
        }
        if (!hand.link_index.count(j.parent_link))
            throw SchemaError("joint '" + j.name + "': unknown parent link '" +
                              j.parent_link + "'");
        if (!hand.link_index.count(j.child_link))
            throw SchemaError("joint '" + j.name + "': unknown child link '" + j.child_link +
                              "'");
        if (joint_index.count(j.name)) throw SchemaError("duplicate joint '" + j.name + "'");
        joint_index[j.name] = static_cast<int>(hand.joints.size());
        hand.joints.push_back(std::move(j));
    }

    // Mimic entries: driven joints take ratio * source value, excluded from dof.
    std::map<std::string, std::pair<std::string, double>> mimics;
    if (doc.contains("mimic"))
        for (const auto& mj : doc["mimic"])
            mimics[mj["joint"].get<std::string>()] = {mj["source"].get<std::string>(),
                                                      mj.value("ratio", 1.0)};

    int next_theta = 0;
    for (auto& j : hand.joints) {
        if (j.type == JointType::Fixed) continue;
        if (mimics.count(j.name)) continue;
        j.theta_index = next_theta++;
    }
    for (auto& [joint_name, src] : mimics) {
        auto it = joint_index.find(joint_name);
        if (it == joint_index.end())
            throw SchemaError("mimic entry names unknown joint '" + joint_name + "'");
        auto sit = joint_index.find(src.first);
        if (sit == joint_index.end())
            throw SchemaError("mimic source names unknown joint '" + src.first + "'");
        const Joint& source = hand.joints[static_cast<std::size_t>(sit->second)];
        if (source.theta_index < 0)
            throw SchemaError("mimic source '" + src.first + "' is not an independent joint");
        Joint& driven = hand.joints[static_cast<std::size_t>(it->second)];
        driven.mimic_source = source.theta_index;
        driven.mimic_ratio = src.second;
    }

    if (next_theta != hand.dof)
        throw SchemaError("hand '" + hand.name + "': dof field is " +
                          std::to_string(hand.dof) + " but spec has " +
                          std::to_string(next_theta) + " independent joints");

    // Tree check: exactly one root, each link at most one parent joint, all
    // links reachable from the root.
    std::vector<int> parent_joint(hand.links.size(), -1);
    for (std::size_t ji = 0; ji < hand.joints.size(); ++ji) {
        const int child = hand.link_index[hand.joints[ji].child_link];
        if (parent_joint[static_cast<std::size_t>(child)] >= 0)
            throw SchemaError("link '" + hand.joints[ji].child_link +
                              "' has more than one parent joint ('" + hand.joints[ji].name +
                              "')");
        parent_joint[static_cast<std::size_t>(child)] = static_cast<int>(ji);
    }
    int root = -1;
    for (std::size_t li = 0; li < hand.links.size(); ++li) {
        if (parent_joint[li] < 0) {
            if (root >= 0)
                throw SchemaError("links '" + hand.links[static_cast<std::size_t>(root)].name +
                                  "' and '" + hand.links[li].name + "' are both roots");
            root = static_cast<int>(li);
        }
    }
    if (root < 0) throw SchemaError("joint graph is cyclic: no root link");
    hand.root_link = root;

    // Topological order by repeated sweeps from the root; a cycle leaves
    // joints unvisited.
    std::vector<char> link_done(hand.links.size(), 0);
    link_done[static_cast<std::size_t>(root)] = 1;
    bool progress = true;
    while (progress) {
        progress = false;
        for (std::size_t ji = 0; ji < hand.joints.size(); ++ji) {
            const Joint& j = hand.joints[ji];
            const int p = hand.link_index[j.parent_link];
            const int c = hand.link_index[j.child_link];
            if (link_done[static_cast<std::size_t>(p)] &&
                !link_done[static_cast<std::size_t>(c)]) {
                hand.joint_topo_order.push_back(static_cast<int>(ji));
                link_done[static_cast<std::size_t>(c)] = 1;
                progress = true;
            }
        }
    }
    if (hand.joint_topo_order.size() != hand.joints.size())
        throw SchemaError("joint graph is cyclic or disconnected");

    for (std::size_t li = 0; li < hand.links.size(); ++li) {
        if (static_cast<int>(li) == root) continue;
        if (hand.links[li].finger.empty())
            throw SchemaError("link '" + hand.links[li].name +
                              "' has no finger assignment");
    }
    if (hand.links[static_cast<std::size_t>(root)].finger.empty())
        hand.links[static_cast<std::size_t>(root)].finger = "palm";

    return hand;
}

inline HandModel load_hand_spec_from_string(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("hand spec JSON parse failure: ") + e.what());
    }
    return parse_hand_spec(doc);
}

inline HandModel load_hand_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open hand spec: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return load_hand_spec_from_string(buf.str());
}

// World transform per link, indexed like hand.links. Wrist link gets
// (axis-angle R, T); every child is parent ∘ joint origin ∘ joint motion.
inline std::vector<Transform> forward_kinematics(const HandModel& hand, const GraspPose& pose,
                                                 double limit_slack = 0.0) {
    hand.validate_pose(pose, limit_slack);
    std::vector<Transform> world(hand.links.size());
    world[static_cast<std::size_t>(hand.root_link)] =
        Transform{axis_angle_to_matrix(pose.R), pose.T};
    for (int ji : hand.joint_topo_order) {
        const Joint& j = hand.joints[static_cast<std::size_t>(ji)];
        const double value = hand.joint_value(j, pose.theta);
        Transform motion;
        switch (j.type) {
            case JointType::Revolute: motion.R = rotation_about(j.axis, value); break;
            case JointType::Prismatic: motion.t = j.axis * value; break;
            case JointType::Fixed: break;
        }
        const int p = hand.link_index.at(j.parent_link);
        const int c = hand.link_index.at(j.child_link);
        world[static_cast<std::size_t>(c)] =
            world[static_cast<std::size_t>(p)] * j.origin * motion;
    }
    return world;
}

// Per-link world-space sample points, in link order.
inline std::vector<std::vector<Vec3>> link_points_world(const HandModel& hand,
                                                        const GraspPose& pose,
                                                        double limit_slack = 0.0) {
    const auto world = forward_kinematics(hand, pose, limit_slack);
    std::vector<std::vector<Vec3>> out(hand.links.size());
    for (std::size_t li = 0; li < hand.links.size(); ++li) {
        out[li].reserve(hand.links[li].sample_points.size());
        for (const auto& p : hand.links[li].sample_points)
            out[li].push_back(world[li].apply(p));
    }
    return out;
}

inline std::vector<Vec3> flatten_points(const std::vector<std::vector<Vec3>>& per_link) {
    std::vector<Vec3> out;
    for (const auto& pts : per_link) out.insert(out.end(), pts.begin(), pts.end());
    return out;
}

}  // namespace graspkit

#endif
