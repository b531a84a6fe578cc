#ifndef GRASPKIT_PIPELINE_HPP
#define GRASPKIT_PIPELINE_HPP

#include <atomic>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "graspkit/bvh.hpp"
#include "graspkit/codec.hpp"
#include "graspkit/contact.hpp"
#include "graspkit/conversation.hpp"
#include "graspkit/hand.hpp"
#include "graspkit/mesh.hpp"
#include "graspkit/metrics.hpp"

namespace graspkit {

namespace fs = std::filesystem;

inline constexpr int kGraspInputSchemaVersion = 1;

// One externally generated grasp; the generators themselves live outside the
// toolkit and only have to emit this record.
struct GraspInputRecord {
    std::string grasp_id;
    std::string object_id;
    std::string generator;
    GraspPose pose;
};

inline nlohmann::ordered_json to_json(const GraspInputRecord& r) {
    nlohmann::ordered_json j;
    j["grasp_id"] = r.grasp_id;
    j["object_id"] = r.object_id;
    j["hand"] = r.pose.hand;
    j["T"] = {r.pose.T.x, r.pose.T.y, r.pose.T.z};
    j["R"] = {r.pose.R.x, r.pose.R.y, r.pose.R.z};
    j["theta"] = r.pose.theta;
    j["generator"] = r.generator;
    return j;
}

inline GraspInputRecord grasp_input_from_json(const nlohmann::json& j) {
    GraspInputRecord r;
    r.grasp_id = j.at("grasp_id").get<std::string>();
    r.object_id = j.at("object_id").get<std::string>();
    r.generator = j.value("generator", std::string());
    r.pose.hand = j.at("hand").get<std::string>();
    const auto& t = j.at("T");
    r.pose.T = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
    const auto& rot = j.at("R");
    r.pose.R = {rot[0].get<double>(), rot[1].get<double>(), rot[2].get<double>()};
    r.pose.theta = j.at("theta").get<std::vector<double>>();
    return r;
}

struct PipelineConfig {
    // paths
    std::string meshes_dir;
    std::string labels_dir;
    std::string hands_dir;
    std::string grasps_path;
    std::string templates_path;      // empty -> builtin templates
    std::string objects_meta_path;   // empty -> ids double as names
    std::string out_dir;

    double epsilon = 0.005;
    double penetration_threshold_m = 0.02;
    int n_bins = 384;
    std::string reconstruct_mode = "center";
    double scale_lo = 0.01, scale_hi = 1.0;
    std::map<std::string, std::size_t> per_pattern = {{"dexterous", 1}, {"gripper", 4}};
    std::map<std::string, std::vector<std::string>> levels = {
        {"dexterous", {"low", "mid", "high"}}, {"gripper", {"low", "mid"}}};
    std::vector<std::string> kinds = {"single_grasp", "multi_mix", "multi_grasp"};
    std::uint64_t seed = 0;
    int workers = 1;
    double pose_limit_slack = 0.0;

    std::string contacts_path() const { return (fs::path(out_dir) / "contacts.jsonl").string(); }
    std::string dropped_path() const { return (fs::path(out_dir) / "dropped.jsonl").string(); }
    std::string bins_path(const std::string& hand) const {
        return (fs::path(out_dir) / ("bins_" + hand + ".json")).string();
    }
    std::string conversations_path() const {
        return (fs::path(out_dir) / "conversations.jsonl").string();
    }
    std::string report_json_path() const { return (fs::path(out_dir) / "report.json").string(); }
    std::string report_text_path() const { return (fs::path(out_dir) / "report.txt").string(); }
    std::string stats_json_path() const { return (fs::path(out_dir) / "stats.json").string(); }
    std::string stats_text_path() const { return (fs::path(out_dir) / "stats.txt").string(); }
    std::string log_path() const { return (fs::path(out_dir) / "run_log.txt").string(); }
};

namespace detail {

inline void env_override(std::string& value, const char* var) {
    if (const char* v = std::getenv(var); v && *v) value = v;
}

}  // namespace detail

inline PipelineConfig parse_config(const nlohmann::json& doc) {
    PipelineConfig c;
    if (doc.contains("paths")) {
        const auto& p = doc["paths"];
        c.meshes_dir = p.value("meshes_dir", std::string());
        c.labels_dir = p.value("labels_dir", std::string());
        c.hands_dir = p.value("hands_dir", std::string());
        c.grasps_path = p.value("grasps", std::string());
        c.templates_path = p.value("templates", std::string());
        c.objects_meta_path = p.value("objects_meta", std::string());
        c.out_dir = p.value("out_dir", std::string());
    }
    c.epsilon = doc.value("epsilon", c.epsilon);
    c.penetration_threshold_m = doc.value("penetration_threshold_m", c.penetration_threshold_m);
    c.n_bins = doc.value("n_bins", c.n_bins);
    c.reconstruct_mode = doc.value("reconstruct_mode", c.reconstruct_mode);
    if (doc.contains("scale_range")) {
        c.scale_lo = doc["scale_range"][0].get<double>();
        c.scale_hi = doc["scale_range"][1].get<double>();
    }
    if (doc.contains("per_pattern"))
        for (auto it = doc["per_pattern"].begin(); it != doc["per_pattern"].end(); ++it)
            c.per_pattern[it.key()] = it.value().get<std::size_t>();
    if (doc.contains("levels"))
        for (auto it = doc["levels"].begin(); it != doc["levels"].end(); ++it)
            c.levels[it.key()] = it.value().get<std::vector<std::string>>();
    if (doc.contains("kinds")) c.kinds = doc["kinds"].get<std::vector<std::string>>();
    c.seed = doc.value("seed", c.seed);
    c.workers = doc.value("workers", c.workers);
    c.pose_limit_slack = doc.value("pose_limit_slack", c.pose_limit_slack);

    // Environment overrides, paths only.
    detail::env_override(c.meshes_dir, "GRASPKIT_MESHES_DIR");
    detail::env_override(c.labels_dir, "GRASPKIT_LABELS_DIR");
    detail::env_override(c.hands_dir, "GRASPKIT_HANDS_DIR");
    detail::env_override(c.grasps_path, "GRASPKIT_GRASPS");
    detail::env_override(c.templates_path, "GRASPKIT_TEMPLATES");
    detail::env_override(c.objects_meta_path, "GRASPKIT_OBJECTS_META");
    detail::env_override(c.out_dir, "GRASPKIT_OUT_DIR");

    if (c.epsilon <= 0.0) throw SchemaError("epsilon must be > 0");
    if (c.penetration_threshold_m <= 0.0)
        throw SchemaError("penetration_threshold_m must be > 0");
    if (c.n_bins < 1 || c.n_bins > 4096) throw SchemaError("n_bins must be in [1, 4096]");
    if (c.workers < 1) throw SchemaError("workers must be >= 1");
    if (!(c.scale_lo < c.scale_hi)) throw SchemaError("scale_range must be increasing");
    parse_reconstruct_mode(c.reconstruct_mode);
    for (const auto& k : c.kinds) parse_kind(k);
    return c;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("config JSON parse failure: ") + e.what());
    }
    return parse_config(doc);
}

// --- shared plumbing -------------------------------------------------------

inline std::vector<nlohmann::json> read_jsonl(const std::string& path,
                                              std::vector<std::size_t>* bad_lines = nullptr) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    std::vector<nlohmann::json> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception&) {
            if (bad_lines) bad_lines->push_back(line_no);
            else throw ParseError("invalid JSON line", line_no);
        }
    }
    return out;
}

// Atomic write: lines land under a temp name and are renamed into place, so
// an interrupted run never leaves a half-written output.
inline void write_lines_atomic(const std::string& path, const std::vector<std::string>& lines) {
    const fs::path target(path);
    fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw Error("cannot write: " + tmp.string());
        for (const auto& l : lines) out << l << "\n";
    }
    fs::rename(tmp, target);
}

inline void write_text_atomic(const std::string& path, const std::string& text) {
    const fs::path target(path);
    fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw Error("cannot write: " + tmp.string());
        out << text;
    }
    fs::rename(tmp, target);
}

// Order-preserving parallel map; the result slot order never depends on
// worker scheduling.
template <typename In, typename Fn>
auto parallel_map(const std::vector<In>& inputs, int workers, Fn&& fn)
    -> std::vector<decltype(fn(inputs.front()))> {
    using Out = decltype(fn(inputs.front()));
    std::vector<Out> results(inputs.size());
    if (inputs.empty()) return results;
    workers = std::min<int>(workers, static_cast<int>(inputs.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < inputs.size(); ++i) results[i] = fn(inputs[i]);
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= inputs.size()) return;
                results[i] = fn(inputs[i]);
            }
        });
    }
    for (auto& t : pool) t.join();
    return results;
}

struct ObjectMeta {
    std::string name;
    std::string caption;
};

inline std::map<std::string, ObjectMeta> load_objects_meta(const std::string& path) {
    std::map<std::string, ObjectMeta> out;
    if (path.empty()) return out;
    std::ifstream in(path);
    if (!in) throw Error("cannot open objects meta: " + path);
    nlohmann::json doc;
    in >> doc;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        ObjectMeta meta;
        meta.name = it.value().value("name", it.key());
        meta.caption = it.value().value("caption", "A " + meta.name + ".");
        out[it.key()] = meta;
    }
    return out;
}

inline std::map<std::string, HandModel> load_hands_dir(const std::string& dir) {
    std::map<std::string, HandModel> hands;
    if (!fs::is_directory(dir)) throw Error("hands_dir is not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        HandModel hand = load_hand_spec(f.string());
        hands[hand.name] = std::move(hand);
    }
    if (hands.empty()) throw Error("no hand specs found in " + dir);
    return hands;
}

// Shared mesh cache; indices are immutable after build and safe to query from
// many workers.
class ObjectLibrary {
public:
    ObjectLibrary(std::string meshes_dir, std::string labels_dir)
        : meshes_dir_(std::move(meshes_dir)), labels_dir_(std::move(labels_dir)) {}

    const DistanceQueryIndex& index(const std::string& object_id) {
        auto it = entries_.find(object_id);
        if (it != entries_.end()) return *it->second->index;
        const fs::path mesh_path = fs::path(meshes_dir_) / (object_id + ".obj");
        if (!fs::exists(mesh_path))
            throw Error("mesh not found for object '" + object_id +
                        "': " + mesh_path.string());
        std::string labels;
        if (!labels_dir_.empty()) {
            const fs::path label_path = fs::path(labels_dir_) / (object_id + ".json");
            if (fs::exists(label_path)) labels = label_path.string();
        }
        auto entry = std::make_unique<Entry>();
        entry->mesh = load_mesh(mesh_path.string(), labels);
        entry->index = std::make_unique<DistanceQueryIndex>(entry->mesh);
        const auto& ref = *entry->index;
        entries_.emplace(object_id, std::move(entry));
        return ref;
    }

    const TriangleMesh& mesh(const std::string& object_id) {
        return index(object_id).mesh();
    }

private:
    struct Entry {
        TriangleMesh mesh;
        std::unique_ptr<DistanceQueryIndex> index;
    };
    std::string meshes_dir_, labels_dir_;
    std::map<std::string, std::unique_ptr<Entry>> entries_;
};

// --- annotate ---------------------------------------------------------------

struct AnnotateResult {
    std::size_t total = 0;
    std::size_t kept = 0;
    std::size_t dropped = 0;
    std::size_t failed = 0;
    std::size_t skipped_existing = 0;
    int exit_code = 0;
};

namespace detail {

struct AnnotateOutcome {
    std::string grasp_id;
    enum class Kind { Kept, Dropped, Failed } kind = Kind::Failed;
    std::string line;    // serialized output row
    std::string reason;  // dropped/failed only
};

inline nlohmann::ordered_json dropped_line(const GraspInputRecord& rec,
                                           const std::string& reason,
                                           const std::string& detail_text) {
    nlohmann::ordered_json j;
    j["schema_version"] = kContactSchemaVersion;
    j["grasp_id"] = rec.grasp_id;
    j["object_id"] = rec.object_id;
    j["hand"] = rec.pose.hand;
    j["reason"] = reason;
    if (!detail_text.empty()) j["detail"] = detail_text;
    return j;
}

}  // namespace detail

// FK -> contact detection -> penetration filter -> summary, per grasp.
// Per-grasp failures are recorded and skipped; the batch never aborts.
// Reruns skip grasps already present in the outputs unless `fresh`.
inline AnnotateResult run_annotate(const PipelineConfig& config, bool fresh = false) {
    AnnotateResult result;
    const auto hands = load_hands_dir(config.hands_dir);
    const auto objects_meta = load_objects_meta(config.objects_meta_path);

    std::vector<std::size_t> bad_lines;
    const auto lines = read_jsonl(config.grasps_path, &bad_lines);
    result.failed += bad_lines.size();

    std::vector<GraspInputRecord> records;
    std::vector<std::string> parse_failures;
    for (const auto& j : lines) {
        try {
            records.push_back(grasp_input_from_json(j));
        } catch (const std::exception& e) {
            parse_failures.push_back(e.what());
        }
    }
    result.failed += parse_failures.size();
    result.total = records.size() + parse_failures.size() + bad_lines.size();

    // Resume: reuse rows already produced for these grasp ids. Rows are kept
    // as raw line text so resumed output stays byte-identical.
    std::map<std::string, std::string> existing_kept, existing_dropped;
    if (!fresh) {
        for (const bool kept_file : {true, false}) {
            const std::string path = kept_file ? config.contacts_path() : config.dropped_path();
            if (!fs::exists(path)) continue;
            std::ifstream in(path);
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                try {
                    const auto j = nlohmann::json::parse(line);
                    const std::string id = j.at("grasp_id").get<std::string>();
                    (kept_file ? existing_kept : existing_dropped)[id] = line;
                } catch (const std::exception&) {
                    // unreadable row: recompute that grasp
                }
            }
        }
    }

    // Pre-build mesh indices single-threaded; queries afterwards are
    // read-only and parallel.
    ObjectLibrary library(config.meshes_dir, config.labels_dir);
    std::set<std::string> needed_objects;
    for (const auto& r : records)
        if (!existing_kept.count(r.grasp_id) && !existing_dropped.count(r.grasp_id))
            needed_objects.insert(r.object_id);
    std::map<std::string, std::string> object_load_errors;
    for (const auto& id : needed_objects) {
        try {
            library.index(id);
        } catch (const std::exception& e) {
            object_load_errors[id] = e.what();
        }
    }

    std::vector<const GraspInputRecord*> todo;
    for (const auto& r : records) {
        if (existing_kept.count(r.grasp_id) || existing_dropped.count(r.grasp_id)) {
            ++result.skipped_existing;
            continue;
        }
        todo.push_back(&r);
    }

    const auto process = [&](const GraspInputRecord* rec) -> detail::AnnotateOutcome {
        detail::AnnotateOutcome out;
        out.grasp_id = rec->grasp_id;
        try {
            auto oit = object_load_errors.find(rec->object_id);
            if (oit != object_load_errors.end())
                throw Error("object '" + rec->object_id + "' failed to load: " + oit->second);
            auto hit = hands.find(rec->pose.hand);
            if (hit == hands.end()) throw Error("unknown hand '" + rec->pose.hand + "'");
            const HandModel& hand = hit->second;
            const DistanceQueryIndex& index = library.index(rec->object_id);

            const auto per_link =
                link_points_world(hand, rec->pose, config.pose_limit_slack);
            ContactRecord record =
                detect_contacts(hand, per_link, index, config.epsilon, rec->grasp_id);
            const FilterDecision decision =
                filter_by_penetration(record, config.penetration_threshold_m);
            if (!decision.keep) {
                out.kind = detail::AnnotateOutcome::Kind::Dropped;
                out.reason = "penetration";
                out.line = detail::dropped_line(
                               *rec, "penetration",
                               "max penetration " + std::to_string(decision.max_penetration) +
                                   " m exceeds threshold " +
                                   std::to_string(config.penetration_threshold_m) + " m")
                               .dump();
                return out;
            }
            if (!record.any_contact()) {
                out.kind = detail::AnnotateOutcome::Kind::Dropped;
                out.reason = "no_contact";
                out.line = detail::dropped_line(*rec, "no_contact", "").dump();
                return out;
            }

            const std::string object_name = objects_meta.count(rec->object_id)
                                                ? objects_meta.at(rec->object_id).name
                                                : rec->object_id;
            const ContactSummary summary =
                summarize_contacts(record, object_name, index.mesh().part_names);

            nlohmann::ordered_json j = to_json(record);
            j["object_id"] = rec->object_id;
            j["object_name"] = object_name;
            j["hand"] = rec->pose.hand;
            j["generator"] = rec->generator;
            j["penetration_threshold_m"] = config.penetration_threshold_m;
            j["pose"] = {{"T", {rec->pose.T.x, rec->pose.T.y, rec->pose.T.z}},
                         {"R", {rec->pose.R.x, rec->pose.R.y, rec->pose.R.z}},
                         {"theta", rec->pose.theta}};
            j["scale_m"] = index.mesh().bounding_sphere_diameter();
            j["pattern"] = contact_pattern_key(record);
            j["summary"] = to_json(summary);
            out.kind = detail::AnnotateOutcome::Kind::Kept;
            out.line = j.dump();
            return out;
        } catch (const std::exception& e) {
            out.kind = detail::AnnotateOutcome::Kind::Failed;
            out.reason = e.what();
            out.line = detail::dropped_line(*rec, "failed", e.what()).dump();
            return out;
        }
    };

    const auto outcomes = parallel_map(todo, config.workers, process);

    std::map<std::string, std::string> kept = std::move(existing_kept);
    std::map<std::string, std::string> dropped = std::move(existing_dropped);
    for (const auto& o : outcomes) {
        if (o.kind == detail::AnnotateOutcome::Kind::Kept) kept[o.grasp_id] = o.line;
        else dropped[o.grasp_id] = o.line;
    }

    // std::map iteration gives grasp-id order. Failure rows live in the
    // dropped file with reason "failed"; count them apart from filter drops
    // so the tally is stable across resumed runs.
    std::vector<std::string> kept_lines, dropped_lines;
    for (const auto& [id, line] : kept) kept_lines.push_back(line);
    std::size_t failed_rows = 0, filter_drops = 0;
    for (const auto& [id, line] : dropped) {
        dropped_lines.push_back(line);
        try {
            if (nlohmann::json::parse(line).value("reason", std::string()) == "failed")
                ++failed_rows;
            else
                ++filter_drops;
        } catch (const std::exception&) {
            ++filter_drops;
        }
    }
    write_lines_atomic(config.contacts_path(), kept_lines);
    write_lines_atomic(config.dropped_path(), dropped_lines);

    result.kept = kept.size();
    result.dropped = filter_drops;
    result.failed += failed_rows;
    if (result.total > 0 && result.failed * 10 > result.total) result.exit_code = 2;

    // Timestamps live only in this sidecar so the data outputs stay
    // byte-identical across reruns.
    {
        const std::time_t now = std::time(nullptr);
        char stamp[32];
        std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        std::ofstream log(config.log_path(), std::ios::app);
        log << stamp << " annotate total=" << result.total << " kept=" << result.kept
            << " dropped=" << result.dropped << " failed=" << result.failed
            << " resumed=" << result.skipped_existing << "\n";
    }
    return result;
}

// --- bounds ------------------------------------------------------------------

struct BoundsResult {
    std::map<std::string, BinSpec> specs;
    std::vector<std::string> warnings;
};

inline GraspPose pose_from_contacts_json(const nlohmann::json& j) {
    GraspPose pose;
    pose.hand = j.at("hand").get<std::string>();
    const auto& pj = j.at("pose");
    const auto& t = pj.at("T");
    pose.T = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
    const auto& r = pj.at("R");
    pose.R = {r[0].get<double>(), r[1].get<double>(), r[2].get<double>()};
    pose.theta = pj.at("theta").get<std::vector<double>>();
    return pose;
}

inline BoundsResult run_bounds(const PipelineConfig& config) {
    BoundsResult result;
    const auto lines = read_jsonl(config.contacts_path());
    std::map<std::string, std::vector<GraspPose>> by_hand;
    for (const auto& j : lines) by_hand[j.at("hand").get<std::string>()].push_back(
        pose_from_contacts_json(j));

    const auto hands = load_hands_dir(config.hands_dir);
    for (const auto& [name, hand] : hands)
        if (!by_hand.count(name))
            result.warnings.push_back("hand '" + name + "' has no kept grasps; skipped");

    for (const auto& [hand, poses] : by_hand) {
        BinSpec spec = compute_bounds(poses, config.n_bins);
        save_bin_spec(spec, config.bins_path(hand));
        result.specs[hand] = std::move(spec);
    }
    return result;
}

// --- build -------------------------------------------------------------------

struct BuildResult {
    std::size_t selected_grasps = 0;
    std::size_t samples = 0;
    std::vector<std::string> warnings;
};

namespace detail {

struct KeptGrasp {
    std::string grasp_id;
    std::string object_id;
    std::string object_name;
    std::string hand;
    GraspPose pose;
    double scale_m = 0.0;
    ContactSummary summary;
    ContactRecord record;
};

inline KeptGrasp kept_from_json(const nlohmann::json& j) {
    KeptGrasp g;
    g.grasp_id = j.at("grasp_id").get<std::string>();
    g.object_id = j.at("object_id").get<std::string>();
    g.object_name = j.value("object_name", g.object_id);
    g.hand = j.at("hand").get<std::string>();
    g.pose = pose_from_contacts_json(j);
    g.scale_m = j.at("scale_m").get<double>();
    g.summary = summary_from_json(j.at("summary"));
    g.record = record_from_json(j);
    return g;
}

inline InstructionLevel pick_level(const std::vector<std::string>& allowed, Rng& rng) {
    return parse_level(allowed[rng.next_below(allowed.size())]);
}

}  // namespace detail

inline BuildResult run_build(const PipelineConfig& config) {
    BuildResult result;
    const auto hands = load_hands_dir(config.hands_dir);
    const auto objects_meta = load_objects_meta(config.objects_meta_path);
    const TemplateSet templates = config.templates_path.empty()
                                      ? TemplateSet::builtin()
                                      : load_templates(config.templates_path);

    std::map<std::string, BinSpec> specs;
    TokenVocabulary vocab;
    vocab.scale_lo = config.scale_lo;
    vocab.scale_hi = config.scale_hi;

    std::vector<detail::KeptGrasp> grasps;
    for (const auto& j : read_jsonl(config.contacts_path()))
        grasps.push_back(detail::kept_from_json(j));

    std::map<std::string, std::vector<const detail::KeptGrasp*>> by_hand;
    for (const auto& g : grasps) by_hand[g.hand].push_back(&g);

    for (const auto& [hand, list] : by_hand) {
        const std::string path = config.bins_path(hand);
        if (!fs::exists(path)) {
            result.warnings.push_back("no bin spec for hand '" + hand +
                                      "'; its grasps are skipped");
            continue;
        }
        specs[hand] = load_bin_spec(path);
        vocab.hands.push_back(hand);
    }
    std::sort(vocab.hands.begin(), vocab.hands.end());

    // Pattern-level deduplication per (hand, object): part ids are
    // object-scoped, so patterns must not collapse across objects.
    // Gripper-class hands keep more grasps per pattern.
    std::map<std::pair<std::string, std::string>, std::vector<const detail::KeptGrasp*>>
        by_hand_object;
    for (const auto& g : grasps)
        if (specs.count(g.hand)) by_hand_object[{g.hand, g.object_id}].push_back(&g);
    std::set<std::string> selected_ids;
    for (const auto& [key, list] : by_hand_object) {
        std::vector<ContactRecord> records;
        records.reserve(list.size());
        for (const auto* g : list) records.push_back(g->record);
        auto hit = hands.find(key.first);
        const std::string hand_class = hit != hands.end() ? hit->second.hand_class : "dexterous";
        const std::size_t per_pattern = config.per_pattern.count(hand_class)
                                            ? config.per_pattern.at(hand_class)
                                            : 1;
        for (auto& id : select_grasps_per_pattern(records, per_pattern, config.seed))
            selected_ids.insert(id);
    }
    result.selected_grasps = selected_ids.size();

    std::map<std::string, const detail::KeptGrasp*> by_id;
    for (const auto& g : grasps) by_id[g.grasp_id] = &g;

    const auto bundle_for = [&](const detail::KeptGrasp& g,
                                InstructionLevel level) -> GraspBundleItem {
        GraspBundleItem item;
        item.grasp_id = g.grasp_id;
        item.object_name = g.object_name;
        item.hand_name = g.hand;
        item.hand_display = hands.count(g.hand) ? hands.at(g.hand).display_name : g.hand;
        item.level = level;
        item.summary = g.summary;
        item.bins = discretize(g.pose, specs.at(g.hand));
        item.scale_m = g.scale_m;
        item.spec_hash = specs.at(g.hand).corpus_hash;
        return item;
    };

    const auto levels_for = [&](const std::string& hand) -> const std::vector<std::string>& {
        static const std::vector<std::string> all = {"low", "mid", "high"};
        auto hit = hands.find(hand);
        const std::string hand_class =
            hit != hands.end() ? hit->second.hand_class : "dexterous";
        auto lit = config.levels.find(hand_class);
        return lit != config.levels.end() ? lit->second : all;
    };

    const bool want_single = std::count(config.kinds.begin(), config.kinds.end(),
                                        "single_grasp") > 0;
    const bool want_mix = std::count(config.kinds.begin(), config.kinds.end(),
                                     "multi_mix") > 0;
    const bool want_multi = std::count(config.kinds.begin(), config.kinds.end(),
                                       "multi_grasp") > 0;

    std::map<std::string, ConversationSample> samples;  // keyed by id -> ordered output
    const auto sample_seed = [&](const std::string& id) {
        return fnv1a(id.data(), id.size(), config.seed ^ 0x9E3779B97F4A7C15ull);
    };

    for (const auto& id : selected_ids) {
        const detail::KeptGrasp& g = *by_id.at(id);
        if (!specs.count(g.hand)) continue;
        const auto& allowed = levels_for(g.hand);
        if (want_single) {
            for (const auto& level_name : allowed) {
                const std::string sid = id + ":single_grasp:" + level_name;
                samples.emplace(
                    sid, build_sample(DialogueKind::SingleGrasp,
                                      {bundle_for(g, parse_level(level_name))}, std::nullopt,
                                      templates, vocab, sample_seed(sid), sid));
            }
        }
        if (want_mix) {
            Rng rng(sample_seed(id + ":multi_mix"));
            const InstructionLevel level = detail::pick_level(allowed, rng);
            const std::string sid = id + ":multi_mix:" + to_string(level);
            const std::string caption = objects_meta.count(g.object_id)
                                            ? objects_meta.at(g.object_id).caption
                                            : "A " + g.object_name + ".";
            samples.emplace(sid, build_sample(DialogueKind::MultiMix, {bundle_for(g, level)},
                                              caption, templates, vocab, sample_seed(sid), sid));
        }
    }

    if (want_multi) {
        // Pair selected grasps per object; ordering by (hand, id) makes
        // cross-hand pairs whenever an object has several hands.
        std::map<std::string, std::vector<const detail::KeptGrasp*>> by_object;
        for (const auto& id : selected_ids) {
            const detail::KeptGrasp& g = *by_id.at(id);
            if (specs.count(g.hand)) by_object[g.object_id].push_back(&g);
        }
        for (auto& [object_id, list] : by_object) {
            std::sort(list.begin(), list.end(),
                      [](const detail::KeptGrasp* a, const detail::KeptGrasp* b) {
                          return a->hand != b->hand ? a->hand < b->hand
                                                    : a->grasp_id < b->grasp_id;
                      });
            // Interleave hands: round-robin across per-hand queues.
            std::map<std::string, std::vector<const detail::KeptGrasp*>> queues;
            for (const auto* g : list) queues[g->hand].push_back(g);
            std::vector<const detail::KeptGrasp*> ordered;
            bool more = true;
            std::size_t row = 0;
            while (more) {
                more = false;
                for (auto& [hand, q] : queues) {
                    if (row < q.size()) {
                        ordered.push_back(q[row]);
                        more = true;
                    }
                }
                ++row;
            }
            for (std::size_t i = 0; i + 1 < ordered.size(); i += 2) {
                const std::string sid =
                    object_id + ":multi_grasp:" + std::to_string(i / 2);
                Rng rng(sample_seed(sid));
                std::vector<GraspBundleItem> items;
                for (const auto* g : {ordered[i], ordered[i + 1]})
                    items.push_back(bundle_for(*g, detail::pick_level(levels_for(g->hand), rng)));
                samples.emplace(sid, build_sample(DialogueKind::MultiGrasp, items, std::nullopt,
                                                  templates, vocab, sample_seed(sid), sid));
            }
        }
    }

    std::vector<std::string> out_lines;
    out_lines.reserve(samples.size());
    for (const auto& [sid, sample] : samples) out_lines.push_back(to_json(sample).dump());
    write_lines_atomic(config.conversations_path(), out_lines);
    result.samples = samples.size();
    return result;
}

// --- eval --------------------------------------------------------------------

struct EvalRunResult {
    EvalReport report;
    std::vector<std::size_t> unparsed_lines;
};

inline EvalRunResult run_eval(const PipelineConfig& config, const std::string& predictions_path,
                              bool force = false) {
    EvalRunResult result;
    const auto hands = load_hands_dir(config.hands_dir);

    std::map<std::string, BinSpec> specs;
    TokenVocabulary vocab;
    vocab.scale_lo = config.scale_lo;
    vocab.scale_hi = config.scale_hi;
    for (const auto& [name, hand] : hands) {
        const std::string path = config.bins_path(name);
        if (fs::exists(path)) {
            specs[name] = load_bin_spec(path);
            vocab.hands.push_back(name);
        }
    }
    std::sort(vocab.hands.begin(), vocab.hands.end());

    // References come from the annotate output; the reference grasp's primary
    // part doubles as the instructed part.
    std::vector<EvalRecord> references;
    ObjectLibrary library(config.meshes_dir, config.labels_dir);
    std::map<std::string, const DistanceQueryIndex*> objects;
    for (const auto& j : read_jsonl(config.contacts_path())) {
        EvalRecord r;
        r.grasp_id = j.at("grasp_id").get<std::string>();
        r.object_id = j.at("object_id").get<std::string>();
        r.pose = pose_from_contacts_json(j);
        const auto summary = summary_from_json(j.at("summary"));
        if (!summary.primary_part.empty()) r.instructed_part = summary.primary_part;
        references.push_back(std::move(r));
    }
    std::map<std::string, std::string> object_of_grasp;
    for (const auto& r : references) {
        object_of_grasp[r.grasp_id] = r.object_id;
        if (!objects.count(r.object_id)) objects[r.object_id] = &library.index(r.object_id);
    }

    const ReconstructMode mode = parse_reconstruct_mode(config.reconstruct_mode);
    std::vector<EvalRecord> predictions;
    std::vector<std::size_t> bad_lines;
    const auto lines = read_jsonl(predictions_path, &bad_lines);
    result.unparsed_lines = bad_lines;
    std::size_t line_no = 0;
    for (const auto& j : lines) {
        ++line_no;
        try {
            EvalRecord r;
            if (j.contains("stream")) {
                r.grasp_id = j.at("grasp_id").get<std::string>();
                const TokenStream stream = parse_stream_text(j["stream"].get<std::string>());
                std::string hand;
                if (!stream.tokens.empty() &&
                    TokenVocabulary::parse_hand_token(stream.tokens[0], hand)) {
                    if (!specs.count(hand))
                        throw Error("no bin spec for hand '" + hand +
                                    "' (run the bounds step first)");
                    if (j.contains("spec_hash") && !force) {
                        const std::string given = j["spec_hash"].get<std::string>();
                        if (given != hash_hex(specs.at(hand).corpus_hash))
                            throw Error("prediction encoded against bin spec " + given +
                                        ", loaded spec is " +
                                        hash_hex(specs.at(hand).corpus_hash) +
                                        " (rerun with --force to override)");
                    }
                }
                const DecodeResult decoded = detokenize(stream, vocab, specs, mode);
                r.pose = decoded.pose;
            } else {
                // Numeric form: GraspInputRecord fields, object_id optional
                // since the matched reference carries it.
                r.grasp_id = j.at("grasp_id").get<std::string>();
                r.pose.hand = j.at("hand").get<std::string>();
                const auto& t = j.at("T");
                r.pose.T = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
                const auto& rot = j.at("R");
                r.pose.R = {rot[0].get<double>(), rot[1].get<double>(), rot[2].get<double>()};
                r.pose.theta = j.at("theta").get<std::vector<double>>();
            }
            auto oit = object_of_grasp.find(r.grasp_id);
            r.object_id = oit != object_of_grasp.end() ? oit->second
                                                       : j.value("object_id", std::string());
            predictions.push_back(std::move(r));
        } catch (const StreamError&) {
            result.unparsed_lines.push_back(line_no);  // malformed stream: excluded
        } catch (const Error&) {
            throw;  // spec-hash refusal and missing specs are hard errors
        } catch (const std::exception&) {
            result.unparsed_lines.push_back(line_no);
        }
    }

    result.report = evaluate_corpus(predictions, references, objects, hands, config.epsilon,
                                    config.pose_limit_slack);
    result.report.unparsed_predictions = result.unparsed_lines.size();

    nlohmann::ordered_json j = to_json(result.report);
    j["unparsed_lines"] = result.unparsed_lines;
    write_text_atomic(config.report_json_path(), j.dump(2) + "\n");
    write_text_atomic(config.report_text_path(), render_table(result.report));
    return result;
}

// --- stats -------------------------------------------------------------------

struct StatsResult {
    std::size_t hands = 0;
    std::size_t objects = 0;
    std::size_t grasps = 0;
    std::size_t conversations = 0;
    std::map<std::string, std::map<std::string, std::size_t>> pattern_histogram;  // hand -> pattern -> n
};

inline StatsResult run_stats(const PipelineConfig& config) {
    StatsResult stats;
    std::set<std::string> hands, objects;
    if (fs::exists(config.contacts_path())) {
        for (const auto& j : read_jsonl(config.contacts_path())) {
            ++stats.grasps;
            const std::string hand = j.at("hand").get<std::string>();
            hands.insert(hand);
            objects.insert(j.at("object_id").get<std::string>());
            ++stats.pattern_histogram[hand][j.value("pattern", std::string())];
        }
    }
    if (fs::exists(config.conversations_path()))
        stats.conversations = read_jsonl(config.conversations_path()).size();
    stats.hands = hands.size();
    stats.objects = objects.size();

    nlohmann::ordered_json j;
    j["hands"] = stats.hands;
    j["objects"] = stats.objects;
    j["grasps"] = stats.grasps;
    j["conversations"] = stats.conversations;
    nlohmann::ordered_json hist;
    for (const auto& [hand, patterns] : stats.pattern_histogram) {
        nlohmann::ordered_json hj;
        for (const auto& [pattern, n] : patterns) hj[pattern] = n;
        hist[hand] = std::move(hj);
    }
    j["contact_patterns"] = std::move(hist);
    write_text_atomic(config.stats_json_path(), j.dump(2) + "\n");

    std::ostringstream table;
    table << std::left << std::setw(8) << "Hand" << std::setw(8) << "Object" << std::setw(8)
          << "Grasp" << std::setw(8) << "Con." << "\n";
    table << std::left << std::setw(8) << stats.hands << std::setw(8) << stats.objects
          << std::setw(8) << stats.grasps << std::setw(8) << stats.conversations << "\n";
    write_text_atomic(config.stats_text_path(), table.str());
    return stats;
}

}  // namespace graspkit

#endif
