#ifndef GRASPKIT_CONTACT_HPP
#define GRASPKIT_CONTACT_HPP

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "graspkit/bvh.hpp"
#include "graspkit/error.hpp"
#include "graspkit/hand.hpp"
#include "graspkit/random.hpp"

namespace graspkit {

inline constexpr int kContactSchemaVersion = 1;

// Canonical participant order used everywhere contact text is rendered:
// human finger names first, then any other finger names alphabetically,
// palm always last.
inline int finger_rank(const std::string& finger) {
    static const std::map<std::string, int> ranks = {
        {"thumb", 0}, {"index", 1}, {"middle", 2}, {"ring", 3}, {"little", 4}};
    auto it = ranks.find(finger);
    if (it != ranks.end()) return it->second;
    return finger == "palm" ? 1000 : 100;
}

inline bool finger_order_less(const std::string& a, const std::string& b) {
    const int ra = finger_rank(a), rb = finger_rank(b);
    return ra != rb ? ra < rb : a < b;
}

struct LinkContact {
    std::string link;
    std::string finger;
    bool in_contact = false;
    std::optional<int> contact_part;           // present iff in_contact
    double min_distance = std::numeric_limits<double>::infinity();  // signed, meters
    double max_penetration = 0.0;              // meters, >= 0
};

struct ContactRecord {
    std::string grasp_id;
    double epsilon = 0.0;  // threshold used at creation
    std::vector<LinkContact> links;
    double max_penetration = 0.0;  // over all hand points, meters
    bool sign_reliable = true;
    std::vector<std::string> warnings;

    bool any_contact() const {
        for (const auto& l : links)
            if (l.in_contact) return true;
        return false;
    }
};

// C(link) = [min over link points of SDF(point | object) < epsilon].
// contact_part is the part of the nearest face at the minimizing point.
inline ContactRecord detect_contacts(const HandModel& hand,
                                     const std::vector<std::vector<Vec3>>& link_points,
                                     const DistanceQueryIndex& index, double epsilon,
                                     const std::string& grasp_id = "") {
    if (epsilon <= 0.0) throw Error("epsilon must be > 0");
    ContactRecord record;
    record.grasp_id = grasp_id;
    record.epsilon = epsilon;
    record.sign_reliable = index.watertight();
    for (std::size_t li = 0; li < hand.links.size(); ++li) {
        LinkContact lc;
        lc.link = hand.links[li].name;
        lc.finger = hand.links[li].finger;
        if (link_points[li].empty()) {
            record.warnings.push_back("link '" + lc.link + "' has no sample points");
            record.links.push_back(std::move(lc));
            continue;
        }
        int best_face = -1;
        for (const auto& p : link_points[li]) {
            const SignedDistance sd = index.signed_distance(p);
            if (sd.value < lc.min_distance) {
                lc.min_distance = sd.value;
                best_face = sd.nearest_face;
            }
            lc.max_penetration = std::max(lc.max_penetration, std::max(0.0, -sd.value));
        }
        lc.in_contact = lc.min_distance < epsilon;
        if (lc.in_contact && best_face >= 0)
            lc.contact_part = index.mesh().part_of_face(best_face);
        record.max_penetration = std::max(record.max_penetration, lc.max_penetration);
        record.links.push_back(std::move(lc));
    }
    return record;
}

enum class SummaryMode { General, Detailed };

struct ContactSummary {
    SummaryMode mode = SummaryMode::General;
    std::vector<std::string> fingers;  // canonical order, palm included when contacting
    std::vector<std::pair<std::string, std::string>> finger_parts;  // (finger, part name)
    std::string part;       // general mode: the single shared part
    int finger_count = 0;   // general mode, palm excluded
    std::string primary_part;  // part named in mid-level instructions
    std::string text;
};

inline std::string count_word(int n) {
    static const char* words[] = {"zero", "one", "two",   "three", "four", "five",
                                  "six",  "seven", "eight", "nine",  "ten"};
    return n >= 0 && n <= 10 ? words[n] : std::to_string(n);
}

inline std::string capitalized(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = char(s[0] - 'a' + 'A');
    return s;
}

namespace detail {

inline std::string join_names(const std::vector<std::string>& names) {
    if (names.empty()) return "";
    if (names.size() == 1) return names[0];
    std::string out;
    for (std::size_t i = 0; i + 1 < names.size(); ++i) {
        out += names[i];
        out += i + 2 < names.size() ? ", " : (names.size() > 2 ? ", and " : " and ");
    }
    out += names.back();
    return out;
}

inline std::string join_clauses(const std::vector<std::string>& clauses) {
    if (clauses.size() == 1) return clauses[0];
    std::string out;
    for (std::size_t i = 0; i + 1 < clauses.size(); ++i) {
        out += clauses[i];
        out += i + 2 < clauses.size() ? ", " : (clauses.size() > 2 ? ", and " : ", and ");
    }
    out += clauses.back();
    return out;
}

}  // namespace detail

// Text is a pure function of the structured fields; re-rendering a summary
// must reproduce it byte for byte.
inline std::string render_summary_text(const ContactSummary& s, const std::string& object_name) {
    const bool palm = std::find(s.fingers.begin(), s.fingers.end(), "palm") != s.fingers.end();
    if (s.mode == SummaryMode::General) {
        if (s.finger_count == 0)
            return "The palm touches the " + s.part + " of the " + object_name + ".";
        std::string text = capitalized(count_word(s.finger_count)) +
                           (s.finger_count == 1 ? " finger grasps the " : " fingers grasp the ") +
                           s.part + " of the " + object_name + ".";
        if (palm) text += " The palm also touches the " + s.part + ".";
        return text;
    }
    // Detailed: fingers grouped by part, groups ordered by their first finger
    // in canonical order; the palm gets its own clause, last.
    std::vector<std::string> clauses;
    std::vector<std::string> group_parts;
    std::map<std::string, std::vector<std::string>> by_part;
    for (const auto& [finger, part] : s.finger_parts) {
        if (finger == "palm") continue;
        if (!by_part.count(part)) group_parts.push_back(part);
        by_part[part].push_back(finger);
    }
    for (const auto& part : group_parts) {
        const auto& names = by_part[part];
        clauses.push_back(detail::join_names(names) +
                          (names.size() == 1 ? " finger contacts the " : " fingers contact the ") +
                          object_name + "'s " + part);
    }
    if (palm) {
        for (const auto& [finger, part] : s.finger_parts)
            if (finger == "palm")
                clauses.push_back("the palm contacts the " + object_name + "'s " + part);
    }
    return capitalized(detail::join_clauses(clauses)) + ".";
}

// General when every contacting participant shares one part, detailed
// otherwise. A finger contacting through several links takes the part of its
// deepest link (ties: lowest part id). Palm participates but is excluded from
// the general-mode finger count.
inline ContactSummary summarize_contacts(const ContactRecord& record,
                                         const std::string& object_name,
                                         const std::map<int, std::string>& part_names) {
    std::map<std::string, std::pair<double, int>> finger_best;  // finger -> (depth, part)
    for (const auto& lc : record.links) {
        if (!lc.in_contact || !lc.contact_part) continue;
        auto it = finger_best.find(lc.finger);
        const std::pair<double, int> cand{lc.min_distance, *lc.contact_part};
        if (it == finger_best.end())
            finger_best.emplace(lc.finger, cand);
        else if (cand.first < it->second.first ||
                 (cand.first == it->second.first && cand.second < it->second.second))
            it->second = cand;
    }
    if (finger_best.empty()) throw Error("no-contact grasp: nothing to summarize");

    const auto name_of = [&](int part) {
        auto it = part_names.find(part);
        if (it != part_names.end()) return it->second;
        return part == 0 ? std::string("body") : "part_" + std::to_string(part);
    };

    ContactSummary s;
    for (const auto& [finger, best] : finger_best) s.fingers.push_back(finger);
    std::sort(s.fingers.begin(), s.fingers.end(), finger_order_less);
    for (const auto& finger : s.fingers)
        s.finger_parts.emplace_back(finger, name_of(finger_best[finger].second));

    std::set<std::string> parts;
    for (const auto& [finger, part] : s.finger_parts) parts.insert(part);
    s.mode = parts.size() == 1 ? SummaryMode::General : SummaryMode::Detailed;

    for (const auto& finger : s.fingers)
        if (finger != "palm") ++s.finger_count;

    if (s.mode == SummaryMode::General) {
        s.part = *parts.begin();
        s.primary_part = s.part;
    } else {
        // Most common part over non-palm fingers; ties go to the part of the
        // earliest finger in canonical order. Palm votes only if it is alone.
        std::map<std::string, int> votes;
        for (const auto& [finger, part] : s.finger_parts)
            if (finger != "palm") ++votes[part];
        if (votes.empty()) votes[s.finger_parts.front().second] = 1;
        int best_votes = -1;
        for (const auto& [finger, part] : s.finger_parts) {
            auto it = votes.find(part);
            if (it == votes.end()) continue;
            if (it->second > best_votes) {
                best_votes = it->second;
                s.primary_part = part;
            }
        }
    }
    s.text = render_summary_text(s, object_name);
    return s;
}

struct FilterDecision {
    bool keep = true;
    double max_penetration = 0.0;  // meters
};

// Drop iff any hand point penetrates deeper than `threshold` (strict).
inline FilterDecision filter_by_penetration(const ContactRecord& record, double threshold) {
    if (threshold <= 0.0) throw Error("penetration threshold must be > 0");
    return {record.max_penetration <= threshold, record.max_penetration};
}

inline FilterDecision filter_by_penetration(const std::vector<Vec3>& hand_points,
                                            const DistanceQueryIndex& index,
                                            double threshold) {
    if (threshold <= 0.0) throw Error("penetration threshold must be > 0");
    double pen = 0.0;
    for (const auto& p : hand_points)
        pen = std::max(pen, std::max(0.0, -index.signed_distance(p).value));
    return {pen <= threshold, pen};
}

// Contact pattern: the sorted set of (finger, part id) pairs of a record.
inline std::string contact_pattern_key(const ContactRecord& record) {
    std::set<std::pair<std::string, int>> pairs;
    for (const auto& lc : record.links)
        if (lc.in_contact && lc.contact_part) pairs.emplace(lc.finger, *lc.contact_part);
    std::string key;
    for (const auto& [finger, part] : pairs) {
        if (!key.empty()) key += "|";
        key += finger + ":" + std::to_string(part);
    }
    return key;
}

// Deduplicate grasps per contact pattern: at most `per_pattern` ids per
// pattern, chosen by seeded shuffle. Output sorted by grasp id.
inline std::vector<std::string> select_grasps_per_pattern(
    const std::vector<ContactRecord>& records, std::size_t per_pattern, std::uint64_t seed) {
    if (per_pattern == 0) throw Error("per_pattern must be >= 1");
    std::map<std::string, std::vector<std::string>> groups;
    for (const auto& r : records) groups[contact_pattern_key(r)].push_back(r.grasp_id);
    std::vector<std::string> selected;
    for (auto& [key, ids] : groups) {
        std::sort(ids.begin(), ids.end());
        Rng rng = Rng(seed).fork(fnv1a(key.data(), key.size()));
        rng.shuffle(ids);
        for (std::size_t i = 0; i < std::min(per_pattern, ids.size()); ++i)
            selected.push_back(ids[i]);
    }
    std::sort(selected.begin(), selected.end());
    return selected;
}

// --- JSONL serialization -------------------------------------------------

inline nlohmann::ordered_json to_json(const ContactSummary& s) {
    nlohmann::ordered_json j;
    j["mode"] = s.mode == SummaryMode::General ? "general" : "detailed";
    j["fingers"] = s.fingers;
    nlohmann::ordered_json fp = nlohmann::ordered_json::array();
    for (const auto& [finger, part] : s.finger_parts) fp.push_back({finger, part});
    j["finger_parts"] = fp;
    if (s.mode == SummaryMode::General) {
        j["part"] = s.part;
        j["finger_count"] = s.finger_count;
    }
    j["primary_part"] = s.primary_part;
    j["text"] = s.text;
    return j;
}

inline ContactSummary summary_from_json(const nlohmann::json& j) {
    ContactSummary s;
    s.mode = j.at("mode").get<std::string>() == "general" ? SummaryMode::General
                                                          : SummaryMode::Detailed;
    s.fingers = j.at("fingers").get<std::vector<std::string>>();
    for (const auto& fp : j.at("finger_parts"))
        s.finger_parts.emplace_back(fp[0].get<std::string>(), fp[1].get<std::string>());
    if (s.mode == SummaryMode::General) {
        s.part = j.at("part").get<std::string>();
        s.finger_count = j.at("finger_count").get<int>();
    }
    s.primary_part = j.at("primary_part").get<std::string>();
    s.text = j.at("text").get<std::string>();
    return s;
}

inline nlohmann::ordered_json to_json(const ContactRecord& r) {
    nlohmann::ordered_json j;
    j["schema_version"] = kContactSchemaVersion;
    j["grasp_id"] = r.grasp_id;
    j["epsilon"] = r.epsilon;
    j["max_penetration_m"] = r.max_penetration;
    j["sign_reliable"] = r.sign_reliable;
    nlohmann::ordered_json links = nlohmann::ordered_json::array();
    for (const auto& lc : r.links) {
        nlohmann::ordered_json lj;
        lj["link"] = lc.link;
        lj["finger"] = lc.finger;
        lj["in_contact"] = lc.in_contact;
        if (lc.contact_part) lj["part"] = *lc.contact_part;
        lj["min_distance"] = std::isfinite(lc.min_distance) ? lc.min_distance : 1e300;
        lj["max_penetration"] = lc.max_penetration;
        links.push_back(std::move(lj));
    }
    j["links"] = std::move(links);
    if (!r.warnings.empty()) j["warnings"] = r.warnings;
    return j;
}

inline ContactRecord record_from_json(const nlohmann::json& j) {
    ContactRecord r;
    r.grasp_id = j.at("grasp_id").get<std::string>();
    r.epsilon = j.at("epsilon").get<double>();
    r.max_penetration = j.at("max_penetration_m").get<double>();
    r.sign_reliable = j.value("sign_reliable", true);
    for (const auto& lj : j.at("links")) {
        LinkContact lc;
        lc.link = lj.at("link").get<std::string>();
        lc.finger = lj.at("finger").get<std::string>();
        lc.in_contact = lj.at("in_contact").get<bool>();
        if (lj.contains("part")) lc.contact_part = lj["part"].get<int>();
        lc.min_distance = lj.at("min_distance").get<double>();
        lc.max_penetration = lj.value("max_penetration", 0.0);
        r.links.push_back(std::move(lc));
    }
    if (j.contains("warnings")) r.warnings = j["warnings"].get<std::vector<std::string>>();
    return r;
}

}  // namespace graspkit

#endif
