#include <doctest.h>

#include "graspkit/hand.hpp"
#include "graspkit/random.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace graspkit;

TEST_SUITE_BEGIN("hand");

namespace {

const std::vector<std::string> kBundledHands = {"allegro", "shadow", "barrett", "jaco",
                                                "panda"};

GraspPose random_pose_within_limits(const HandModel& hand, Rng& rng) {
    GraspPose pose;
    pose.hand = hand.name;
    pose.T = {rng.next_in(-0.2, 0.2), rng.next_in(-0.2, 0.2), rng.next_in(-0.2, 0.2)};
    pose.R = {rng.next_in(-1.5, 1.5), rng.next_in(-1.5, 1.5), rng.next_in(-1.5, 1.5)};
    pose.theta.resize(static_cast<std::size_t>(hand.dof));
    for (int i = 0; i < hand.dof; ++i) {
        const auto [lo, hi] = hand.theta_limits(i);
        pose.theta[static_cast<std::size_t>(i)] = rng.next_in(lo, hi);
    }
    return pose;
}

}  // namespace

TEST_CASE("minimal two-link chain loads with dof 1") {
    const HandModel hand = load_hand_spec_from_string(fixtures::twolink_hand_json());
    CHECK(hand.dof == 1);
    CHECK(hand.links.size() == 2);
    CHECK(hand.root_link == hand.index_of_link("palm"));
    CHECK(hand.links[1].finger == "index");
}

TEST_CASE("dof mismatch against independent joint count is rejected") {
    std::string spec = fixtures::twolink_hand_json();
    const auto pos = spec.find("\"dof\": 1");
    REQUIRE(pos != std::string::npos);
    spec.replace(pos, 8, "\"dof\": 2");
    CHECK_THROWS_AS(load_hand_spec_from_string(spec), SchemaError);
}

TEST_CASE("non-unit axis names the offending joint") {
    std::string spec = fixtures::twolink_hand_json();
    const auto pos = spec.find("[0, 0, 1]");
    REQUIRE(pos != std::string::npos);
    spec.replace(pos, 9, "[0, 0, 2]");
    try {
        load_hand_spec_from_string(spec);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("j0") != std::string::npos);
    }
}

TEST_CASE("cyclic joint graph is rejected") {
    const std::string spec = R"JSON({
      "name": "loop", "dof": 2,
      "joints": [
        {"name": "j0", "parent_link": "a", "child_link": "b", "type": "revolute",
         "axis": [0,0,1], "limits": [-1, 1]},
        {"name": "j1", "parent_link": "b", "child_link": "a", "type": "revolute",
         "axis": [0,0,1], "limits": [-1, 1]}
      ],
      "links": [
        {"name": "a", "finger": "palm", "sample_points": []},
        {"name": "b", "finger": "index", "sample_points": []}
      ]
    })JSON";
    CHECK_THROWS_AS(load_hand_spec_from_string(spec), SchemaError);
}

TEST_CASE("inverted limits are rejected") {
    std::string spec = fixtures::twolink_hand_json();
    const auto pos = spec.find("[-3.1415926535897932, 3.1415926535897932]");
    REQUIRE(pos != std::string::npos);
    spec.replace(pos, 42, "[1.0, -1.0]");
    CHECK_THROWS_AS(load_hand_spec_from_string(spec), SchemaError);
}

TEST_CASE("zero pose composes static origins only") {
    const HandModel hand = load_hand_spec_from_string(fixtures::chain2_hand_json());
    GraspPose pose;
    pose.hand = "chain2";
    pose.theta = {0.0, 0.0};
    const auto world = forward_kinematics(hand, pose);
    // upper = origin(j0); lower = origin(j0) * origin(j1)
    const Transform expected_upper = hand.joints[0].origin;
    const Transform expected_lower = hand.joints[0].origin * hand.joints[1].origin;
    const int upper = hand.index_of_link("upper");
    const int lower = hand.index_of_link("lower");
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            CHECK(world[upper].R.m[i][j] ==
                  doctest::Approx(expected_upper.R.m[i][j]).epsilon(1e-12));
            CHECK(world[lower].R.m[i][j] ==
                  doctest::Approx(expected_lower.R.m[i][j]).epsilon(1e-12));
        }
    CHECK(distance(world[upper].t, expected_upper.t) <= 1e-12);
    CHECK(distance(world[lower].t, expected_lower.t) <= 1e-12);
}

TEST_CASE("quarter turn about z maps (1,0,0) to (0,1,0)") {
    const HandModel hand = load_hand_spec_from_string(fixtures::twolink_hand_json());
    GraspPose pose;
    pose.hand = "twolink";
    pose.theta = {3.14159265358979323846 / 2.0};
    const auto points = link_points_world(hand, pose);
    const Vec3 tip = points[static_cast<std::size_t>(hand.index_of_link("tip"))][0];
    CHECK(std::abs(tip.x - 0.0) <= 1e-12);
    CHECK(std::abs(tip.y - 1.0) <= 1e-12);
    CHECK(std::abs(tip.z - 0.0) <= 1e-12);
}

TEST_CASE("two-joint chain matches the raw 4x4 matrix oracle") {
    const HandModel hand = load_hand_spec_from_string(fixtures::chain2_hand_json());
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const GraspPose pose = random_pose_within_limits(hand, rng);

        // Oracle: explicit homogeneous products, independent code path.
        const auto origin_to_mat4 = [](const Transform& t) {
            oracles::Mat4 m = oracles::mat4_identity();
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) m[i][j] = t.R.m[i][j];
                m[i][3] = t.t[i];
            }
            return m;
        };
        const oracles::Mat4 wrist =
            oracles::mat4_from_axis_angle(pose.R, norm(pose.R) > 0 ? norm(pose.R) : 0.0,
                                          pose.T);
        const oracles::Mat4 m_upper = oracles::mat4_mul(
            oracles::mat4_mul(wrist, origin_to_mat4(hand.joints[0].origin)),
            oracles::mat4_from_axis_angle(hand.joints[0].axis, pose.theta[0]));
        const oracles::Mat4 m_lower = oracles::mat4_mul(
            oracles::mat4_mul(m_upper, origin_to_mat4(hand.joints[1].origin)),
            oracles::mat4_from_axis_angle(hand.joints[1].axis, pose.theta[1]));

        const auto points = link_points_world(hand, pose);
        const int upper = hand.index_of_link("upper");
        const int lower = hand.index_of_link("lower");
        for (std::size_t k = 0; k < hand.links[static_cast<std::size_t>(upper)].sample_points.size(); ++k) {
            const Vec3 expected = oracles::mat4_apply(
                m_upper, hand.links[static_cast<std::size_t>(upper)].sample_points[k]);
            CHECK(distance(points[static_cast<std::size_t>(upper)][k], expected) <= 1e-10);
        }
        for (std::size_t k = 0; k < hand.links[static_cast<std::size_t>(lower)].sample_points.size(); ++k) {
            const Vec3 expected = oracles::mat4_apply(
                m_lower, hand.links[static_cast<std::size_t>(lower)].sample_points[k]);
            CHECK(distance(points[static_cast<std::size_t>(lower)][k], expected) <= 1e-10);
        }
    }
}

TEST_CASE("translation-only pose shifts every point rigidly") {
    const HandModel hand = load_hand_spec_from_string(fixtures::chain2_hand_json());
    GraspPose zero;
    zero.hand = "chain2";
    zero.theta = {0.3, -0.4};
    GraspPose shifted = zero;
    shifted.T = {0, 0, 0.1};
    const auto base = link_points_world(hand, zero);
    const auto moved = link_points_world(hand, shifted);
    for (std::size_t li = 0; li < base.size(); ++li)
        for (std::size_t k = 0; k < base[li].size(); ++k)
            CHECK(distance(moved[li][k], base[li][k] + Vec3{0, 0, 0.1}) <= 1e-12);
}

TEST_CASE("poses outside limits fail before any geometry is computed") {
    const HandModel hand = load_hand_spec_from_string(fixtures::twolink_hand_json());
    GraspPose pose;
    pose.hand = "twolink";
    pose.theta = {4.0};  // beyond pi
    CHECK_THROWS_AS(forward_kinematics(hand, pose), Error);
    CHECK_THROWS_AS(link_points_world(hand, pose), Error);
    // Slack admits it.
    CHECK_NOTHROW(forward_kinematics(hand, pose, 1.0));
}

TEST_CASE("hand-name mismatch is rejected") {
    const HandModel hand = load_hand_spec_from_string(fixtures::twolink_hand_json());
    GraspPose pose;
    pose.hand = "other";
    pose.theta = {0.0};
    CHECK_THROWS_AS(forward_kinematics(hand, pose), Error);
}

TEST_CASE("bundled specs load, validate, and carry 512 sample points") {
    for (const auto& name : kBundledHands) {
        const HandModel hand = load_hand_spec(fixtures::bundled_hand_path(name));
        CAPTURE(name);
        CHECK(hand.name == name);
        CHECK(hand.dof >= 1);
        CHECK(hand.total_sample_points() == 512);
    }
}

TEST_CASE("bundled panda gripper has one mimic-coupled prismatic dof") {
    const HandModel hand = load_hand_spec(fixtures::bundled_hand_path("panda"));
    CHECK(hand.dof == 1);
    CHECK(hand.hand_class == "gripper");
    int mimics = 0;
    for (const auto& j : hand.joints)
        if (j.mimic_source >= 0) ++mimics;
    CHECK(mimics == 1);
    // Closing the gripper moves both finger links symmetrically.
    GraspPose open;
    open.hand = "panda";
    open.theta = {0.04};
    const auto world = forward_kinematics(hand, open);
    GraspPose closed = open;
    closed.theta = {0.0};
    const auto world2 = forward_kinematics(hand, closed);
    bool some_link_moved = false;
    for (std::size_t li = 0; li < hand.links.size(); ++li)
        if (distance(world[li].t, world2[li].t) > 1e-9) some_link_moved = true;
    CHECK(some_link_moved);
}

TEST_CASE("rigidity: pairwise link-point distances are pose invariant") {
    Rng rng(77);
    for (const auto& name : kBundledHands) {
        const HandModel hand = load_hand_spec(fixtures::bundled_hand_path(name));
        for (int trial = 0; trial < 5; ++trial) {
            const GraspPose pose = random_pose_within_limits(hand, rng);
            const auto points = link_points_world(hand, pose);
            for (std::size_t li = 0; li < hand.links.size(); ++li) {
                const auto& local = hand.links[li].sample_points;
                if (local.size() < 2) continue;
                // Spot-check a few pairs per link.
                for (std::size_t k = 1; k < std::min<std::size_t>(local.size(), 6); ++k) {
                    const double expected = distance(local[0], local[k]);
                    const double got = distance(points[li][0], points[li][k]);
                    CHECK(std::abs(expected - got) <= 1e-9);
                }
            }
        }
    }
}

TEST_CASE("FK composes: wrist-only then joints-only equals the full pose") {
    const HandModel hand = load_hand_spec_from_string(fixtures::chain2_hand_json());
    Rng rng(5150);
    const GraspPose full = random_pose_within_limits(hand, rng);

    GraspPose joints_only = full;
    joints_only.T = {0, 0, 0};
    joints_only.R = {0, 0, 0};
    const Transform wrist{axis_angle_to_matrix(full.R), full.T};

    const auto direct = forward_kinematics(hand, full);
    const auto staged = forward_kinematics(hand, joints_only);
    for (std::size_t li = 0; li < hand.links.size(); ++li) {
        const Transform composed = wrist * staged[li];
        CHECK(distance(composed.t, direct[li].t) <= 1e-10);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                CHECK(std::abs(composed.R.m[i][j] - direct[li].R.m[i][j]) <= 1e-10);
    }
}

TEST_SUITE_END();
