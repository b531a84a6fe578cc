// A pinned end-to-end corpus: 2 labelled objects x 2 toy hands x 5 grasps
// each. Exactly one grasp (crate/probe #4) penetrates 3 cm and is dropped at
// the 2 cm threshold; the remaining 19 all make contact and are kept.
//
// Geometry, by construction:
//   crate  = unit cube, half extent 0.5, faces 0..5 "body", 6..11 "lid"
//   hammer = cube, half extent 0.25, faces 0..5 "grip", 6..11 "head"
//   probe   hand: two fingers 0.05 above/below the wrist along z
//   twolink hand: palm point at the wrist, finger point 1 m along x,
//                 one revolute joint about z
#ifndef GRASPKIT_TESTS_PIPELINE_FIXTURE_HPP
#define GRASPKIT_TESTS_PIPELINE_FIXTURE_HPP

#include <string>
#include <vector>

#include "graspkit/pipeline.hpp"
#include "support/fixtures.hpp"

namespace pipeline_fixture {

constexpr std::size_t kTotalGrasps = 20;
constexpr std::size_t kKeptGrasps = 19;
constexpr std::size_t kDroppedGrasps = 1;
constexpr const char* kDroppedId = "crate_probe_4";
// Distinct contact patterns per (hand, object):
//   crate/probe 2, crate/twolink 3, hammer/probe 2, hammer/twolink 4.
constexpr std::size_t kSelectedPerPattern1 = 11;

inline std::string grasp_line(const std::string& id, const std::string& object,
                              const std::string& hand, double tx, double ty, double tz,
                              const std::vector<double>& theta) {
    nlohmann::ordered_json j;
    j["grasp_id"] = id;
    j["object_id"] = object;
    j["hand"] = hand;
    j["T"] = {tx, ty, tz};
    j["R"] = {0.0, 0.0, 0.0};
    j["theta"] = theta;
    j["generator"] = "fixture";
    return j.dump();
}

inline std::string grasps_jsonl() {
    const double half_pi = 1.5707963267948966;
    std::string out;
    // crate + probe: three lid-pair grasps, one body pair, one 3 cm
    // penetration (0.5 - 0.47).
    out += grasp_line("crate_probe_0", "crate", "probe", 0.499, 0, 0, {0, 0}) + "\n";
    out += grasp_line("crate_probe_1", "crate", "probe", -0.499, 0, 0, {0, 0}) + "\n";
    out += grasp_line("crate_probe_2", "crate", "probe", 0, -0.499, 0, {0, 0}) + "\n";
    out += grasp_line("crate_probe_3", "crate", "probe", 0, 0.499, 0, {0, 0}) + "\n";
    out += grasp_line("crate_probe_4", "crate", "probe", 0.47, 0, 0, {0, 0}) + "\n";
    // crate + twolink: palm+finger pairs and two single-finger patterns.
    out += grasp_line("crate_twolink_0", "crate", "twolink", -0.501, 0, 0, {0}) + "\n";
    out += grasp_line("crate_twolink_1", "crate", "twolink", -0.501, 0.1, 0, {0}) + "\n";
    out += grasp_line("crate_twolink_2", "crate", "twolink", -0.501, -0.2, 0, {0}) + "\n";
    out += grasp_line("crate_twolink_3", "crate", "twolink", 0, -1.499, 0, {half_pi}) + "\n";
    out += grasp_line("crate_twolink_4", "crate", "twolink", 0.3, -0.5055, 0, {half_pi}) + "\n";
    // hammer + probe.
    out += grasp_line("hammer_probe_0", "hammer", "probe", 0.249, 0, 0, {0, 0}) + "\n";
    out += grasp_line("hammer_probe_1", "hammer", "probe", -0.249, 0, 0, {0, 0}) + "\n";
    out += grasp_line("hammer_probe_2", "hammer", "probe", 0, -0.249, 0, {0, 0}) + "\n";
    out += grasp_line("hammer_probe_3", "hammer", "probe", 0, 0.249, 0, {0, 0}) + "\n";
    out += grasp_line("hammer_probe_4", "hammer", "probe", 0.2495, 0, 0, {0, 0}) + "\n";
    // hammer + twolink.
    out += grasp_line("hammer_twolink_0", "hammer", "twolink", -1.249, 0, 0, {0}) + "\n";
    out += grasp_line("hammer_twolink_1", "hammer", "twolink", -1.2495, 0, 0, {0}) + "\n";
    out += grasp_line("hammer_twolink_2", "hammer", "twolink", 0, -1.249, 0, {half_pi}) + "\n";
    out += grasp_line("hammer_twolink_3", "hammer", "twolink", -0.2535, 0, 0, {0}) + "\n";
    out += grasp_line("hammer_twolink_4", "hammer", "twolink", 0, 0, 0.249, {0}) + "\n";
    return out;
}

struct Layout {
    std::string config_path;
    graspkit::PipelineConfig config;
};

// Materialize the corpus under `dir` and return a ready config. per_pattern
// defaults to 1 for both hand classes so pattern collapse is visible.
inline Layout materialize(const fixtures::TempDir& dir, int workers = 1,
                          std::size_t per_pattern_gripper = 1) {
    dir.write("meshes/crate.obj", fixtures::cube_obj_text(0.5));
    dir.write("meshes/hammer.obj", fixtures::cube_obj_text(0.25));
    dir.write("labels/crate.json", fixtures::cube_labels_json("body", "lid"));
    dir.write("labels/hammer.json", fixtures::cube_labels_json("grip", "head"));
    dir.write("hands/probe.json", fixtures::probe_hand_json());
    dir.write("hands/twolink.json", fixtures::twolink_hand_json());
    dir.write("grasps.jsonl", grasps_jsonl());
    dir.write("objects.json",
              R"({"crate": {"name": "crate", "caption": "A slatted wooden crate."},
                  "hammer": {"name": "hammer", "caption": "A claw hammer."}})");

    nlohmann::ordered_json config;
    config["paths"] = {{"meshes_dir", dir.str() + "/meshes"},
                       {"labels_dir", dir.str() + "/labels"},
                       {"hands_dir", dir.str() + "/hands"},
                       {"grasps", dir.str() + "/grasps.jsonl"},
                       {"objects_meta", dir.str() + "/objects.json"},
                       {"out_dir", dir.str() + "/out"}};
    config["epsilon"] = 0.005;
    config["penetration_threshold_m"] = 0.02;
    config["n_bins"] = 384;
    config["seed"] = 7;
    config["workers"] = workers;
    config["per_pattern"] = {{"dexterous", 1}, {"gripper", per_pattern_gripper}};

    Layout layout;
    layout.config_path = dir.write("config.json", config.dump(2));
    layout.config = graspkit::load_config(layout.config_path);
    return layout;
}

}  // namespace pipeline_fixture

#endif
