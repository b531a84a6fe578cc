#ifndef GRASPKIT_METRICS_HPP
#define GRASPKIT_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "graspkit/bvh.hpp"
#include "graspkit/contact.hpp"
#include "graspkit/error.hpp"
#include "graspkit/hand.hpp"

namespace graspkit {

inline constexpr const char* kChamferDefinition =
    "0.5 * (mean_a min_b |a-b| + mean_b min_a |a-b|), euclidean (non-squared), cm";

// Minimal static kd-tree for nearest-neighbor queries over a point set.
class KdTree3 {
public:
    explicit KdTree3(const std::vector<Vec3>& points) : points_(points) {
        order_.resize(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) order_[i] = static_cast<int>(i);
        if (!points.empty()) root_ = build(0, points.size(), 0);
    }

    // Squared distance and index of the nearest point.
    std::pair<double, int> nearest(const Vec3& q) const {
        double best = std::numeric_limits<double>::infinity();
        int best_idx = -1;
        search(root_, q, best, best_idx);
        return {best, best_idx};
    }

private:
    struct Node {
        int point = -1;
        int left = -1, right = -1;
        int axis = 0;
    };

    const std::vector<Vec3>& points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int root_ = -1;

    int build(std::size_t start, std::size_t end, int depth) {
        if (start >= end) return -1;
        const int axis = depth % 3;
        const std::size_t mid = (start + end) / 2;
        std::nth_element(order_.begin() + static_cast<long>(start),
                         order_.begin() + static_cast<long>(mid),
                         order_.begin() + static_cast<long>(end), [&](int a, int b) {
                             return points_[static_cast<std::size_t>(a)][axis] <
                                    points_[static_cast<std::size_t>(b)][axis];
                         });
        Node node;
        node.point = order_[mid];
        node.axis = axis;
        const int idx = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        const int l = build(start, mid, depth + 1);
        const int r = build(mid + 1, end, depth + 1);
        nodes_[static_cast<std::size_t>(idx)].left = l;
        nodes_[static_cast<std::size_t>(idx)].right = r;
        return idx;
    }

    void search(int ni, const Vec3& q, double& best, int& best_idx) const {
        if (ni < 0) return;
        const Node& node = nodes_[static_cast<std::size_t>(ni)];
        const Vec3& p = points_[static_cast<std::size_t>(node.point)];
        const double d2 = norm2(q - p);
        if (d2 < best || (d2 == best && node.point < best_idx)) {
            best = d2;
            best_idx = node.point;
        }
        const double delta = q[node.axis] - p[node.axis];
        const int near = delta <= 0.0 ? node.left : node.right;
        const int far = delta <= 0.0 ? node.right : node.left;
        search(near, q, best, best_idx);
        if (delta * delta <= best) search(far, q, best, best_idx);
    }
};

// Symmetric Chamfer distance between two point sets, reported in cm.
inline double chamfer_distance_cm(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty()) throw Error("chamfer distance needs non-empty point sets");
    const KdTree3 tree_a(a), tree_b(b);
    double sum_ab = 0.0;
    for (const auto& p : a) sum_ab += std::sqrt(tree_b.nearest(p).first);
    double sum_ba = 0.0;
    for (const auto& p : b) sum_ba += std::sqrt(tree_a.nearest(p).first);
    const double cd_m = 0.5 * (sum_ab / double(a.size()) + sum_ba / double(b.size()));
    return cd_m * 100.0;
}

struct PenetrationResult {
    double cm = 0.0;
    bool sign_reliable = true;
};

// Deepest interior excursion of any hand point, in cm; 0 when nothing is
// inside.
inline PenetrationResult max_penetration_cm(const std::vector<Vec3>& hand_points,
                                            const DistanceQueryIndex& index) {
    PenetrationResult out;
    out.sign_reliable = index.watertight();
    double pen_m = 0.0;
    for (const auto& p : hand_points)
        pen_m = std::max(pen_m, std::max(0.0, -index.signed_distance(p).value));
    out.cm = pen_m * 100.0;
    return out;
}

// True iff a strict majority of contacting fingers (palm excluded) touched
// the instructed part. Ties count as mismatch.
inline bool part_match(const ContactSummary& predicted, const std::string& instructed_part) {
    int on_part = 0, total = 0;
    for (const auto& [finger, part] : predicted.finger_parts) {
        if (finger == "palm") continue;
        ++total;
        if (part == instructed_part) ++on_part;
    }
    if (total == 0) return false;
    return 2 * on_part > total;
}

struct EvalRow {
    std::string grasp_id;
    std::string hand;
    std::string object;
    double cd_cm = 0.0;
    double pen_cm = 0.0;
    std::optional<bool> part_matched;
};

struct HandAggregate {
    std::size_t count = 0;
    double mean_cd_cm = 0.0;
    double mean_pen_cm = 0.0;
    std::optional<double> part_accuracy;  // over rows that carried a part
};

struct EvalReport {
    std::string cd_definition = kChamferDefinition;
    std::vector<EvalRow> rows;
    std::map<std::string, HandAggregate> per_hand;
    HandAggregate overall;
    std::vector<std::string> missing_ids;    // ids present on one side only
    std::size_t unparsed_predictions = 0;
};

// One prediction or reference: a full pose plus optional instructed part.
struct EvalRecord {
    std::string grasp_id;
    std::string object_id;
    GraspPose pose;
    std::optional<std::string> instructed_part;
};

namespace detail {

inline HandAggregate aggregate_rows(const std::vector<const EvalRow*>& rows) {
    HandAggregate agg;
    agg.count = rows.size();
    if (rows.empty()) return agg;
    double cd = 0.0, pen = 0.0;
    std::size_t with_part = 0, matched = 0;
    for (const auto* r : rows) {
        cd += r->cd_cm;
        pen += r->pen_cm;
        if (r->part_matched) {
            ++with_part;
            if (*r->part_matched) ++matched;
        }
    }
    agg.mean_cd_cm = cd / double(rows.size());
    agg.mean_pen_cm = pen / double(rows.size());
    if (with_part > 0) agg.part_accuracy = double(matched) / double(with_part);
    return agg;
}

}  // namespace detail

// Pair predictions and references by grasp id; per pair compute CD between
// the two hands' world point clouds, penetration of the predicted hand into
// the object, and part agreement when the reference carried an instructed
// part.
inline EvalReport evaluate_corpus(
    const std::vector<EvalRecord>& predictions, const std::vector<EvalRecord>& references,
    const std::map<std::string, const DistanceQueryIndex*>& objects,
    const std::map<std::string, HandModel>& hands, double epsilon,
    double pose_limit_slack = 0.0) {
    EvalReport report;

    std::map<std::string, const EvalRecord*> ref_by_id;
    for (const auto& r : references) ref_by_id[r.grasp_id] = &r;
    std::map<std::string, const EvalRecord*> pred_by_id;
    for (const auto& p : predictions) pred_by_id[p.grasp_id] = &p;

    for (const auto& [id, ref] : ref_by_id)
        if (!pred_by_id.count(id)) report.missing_ids.push_back(id);
    for (const auto& [id, pred] : pred_by_id)
        if (!ref_by_id.count(id)) report.missing_ids.push_back(id);

    for (const auto& [id, pred] : pred_by_id) {
        auto rit = ref_by_id.find(id);
        if (rit == ref_by_id.end()) continue;
        const EvalRecord& ref = *rit->second;
        if (!ref.pose.hand.empty() && ref.pose.hand != pred->pose.hand) {
            // Prediction answered with a different hand; the point clouds are
            // not comparable. Listed and excluded like an id mismatch.
            report.missing_ids.push_back(id);
            continue;
        }

        auto hit = hands.find(pred->pose.hand);
        if (hit == hands.end())
            throw Error("no hand spec loaded for hand '" + pred->pose.hand + "'");
        const HandModel& hand = hit->second;

        auto oit = objects.find(ref.object_id);
        if (oit == objects.end())
            throw Error("no object mesh loaded for object '" + ref.object_id + "'");
        const DistanceQueryIndex& index = *oit->second;

        const auto pred_points =
            flatten_points(link_points_world(hand, pred->pose, pose_limit_slack));
        const auto ref_points =
            flatten_points(link_points_world(hand, ref.pose, pose_limit_slack));

        EvalRow row;
        row.grasp_id = id;
        row.hand = pred->pose.hand;
        row.object = ref.object_id;
        row.cd_cm = chamfer_distance_cm(pred_points, ref_points);
        row.pen_cm = max_penetration_cm(pred_points, index).cm;
        if (ref.instructed_part) {
            const auto per_link = link_points_world(hand, pred->pose, pose_limit_slack);
            const ContactRecord record = detect_contacts(hand, per_link, index, epsilon, id);
            if (record.any_contact()) {
                const ContactSummary summary =
                    summarize_contacts(record, ref.object_id, index.mesh().part_names);
                row.part_matched = part_match(summary, *ref.instructed_part);
            } else {
                row.part_matched = false;
            }
        }
        report.rows.push_back(std::move(row));
    }
    std::sort(report.missing_ids.begin(), report.missing_ids.end());

    std::map<std::string, std::vector<const EvalRow*>> by_hand;
    std::vector<const EvalRow*> all;
    for (const auto& r : report.rows) {
        by_hand[r.hand].push_back(&r);
        all.push_back(&r);
    }
    for (const auto& [hand, rows] : by_hand)
        report.per_hand[hand] = detail::aggregate_rows(rows);
    report.overall = detail::aggregate_rows(all);
    return report;
}

inline nlohmann::ordered_json to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["cd_definition"] = report.cd_definition;
    nlohmann::ordered_json per_hand;
    const auto agg_json = [](const HandAggregate& a) {
        nlohmann::ordered_json aj;
        aj["count"] = a.count;
        aj["mean_cd_cm"] = a.mean_cd_cm;
        aj["mean_pen_cm"] = a.mean_pen_cm;
        if (a.part_accuracy) aj["part_accuracy"] = *a.part_accuracy;
        aj["suc"] = nullptr;  // simulator success is out of scope, column kept
        return aj;
    };
    for (const auto& [hand, agg] : report.per_hand) per_hand[hand] = agg_json(agg);
    j["per_hand"] = std::move(per_hand);
    j["overall"] = agg_json(report.overall);
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : report.rows) {
        nlohmann::ordered_json rj;
        rj["grasp_id"] = r.grasp_id;
        rj["hand"] = r.hand;
        rj["object"] = r.object;
        rj["cd_cm"] = r.cd_cm;
        rj["pen_cm"] = r.pen_cm;
        if (r.part_matched) rj["part_match"] = *r.part_matched;
        rows.push_back(std::move(rj));
    }
    j["per_grasp"] = std::move(rows);
    j["missing_ids"] = report.missing_ids;
    j["unparsed_predictions"] = report.unparsed_predictions;
    return j;
}

// Aligned text table: one column triple (CD / Pen / Suc) per hand plus the
// average; Suc is always n/a here.
inline std::string render_table(const EvalReport& report) {
    std::vector<std::string> hands;
    for (const auto& [hand, agg] : report.per_hand) hands.push_back(hand);
    std::ostringstream os;
    os << std::left << std::setw(14) << "Model";
    for (const auto& h : hands) os << std::setw(22) << (h + " CD/Pen/Suc");
    os << std::setw(22) << "Avg CD/Pen/Suc" << "\n";
    os << std::left << std::setw(14) << "this-run";
    os << std::fixed << std::setprecision(2);
    const auto cell = [&](const HandAggregate& a) {
        std::ostringstream c;
        c << std::fixed << std::setprecision(2) << a.mean_cd_cm << " / " << a.mean_pen_cm
          << " / n/a";
        return c.str();
    };
    for (const auto& h : hands) os << std::setw(22) << cell(report.per_hand.at(h));
    os << std::setw(22) << cell(report.overall) << "\n";
    return os.str();
}

}  // namespace graspkit

#endif
