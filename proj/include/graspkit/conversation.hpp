#ifndef GRASPKIT_CONVERSATION_HPP
#define GRASPKIT_CONVERSATION_HPP

#include <functional>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "graspkit/codec.hpp"
#include "graspkit/contact.hpp"
#include "graspkit/error.hpp"

namespace graspkit {

inline constexpr int kConversationSchemaVersion = 1;

enum class InstructionLevel { Low, Mid, High };

inline std::string to_string(InstructionLevel level) {
    switch (level) {
        case InstructionLevel::Low: return "low";
        case InstructionLevel::Mid: return "mid";
        case InstructionLevel::High: return "high";
    }
    return "low";
}

inline InstructionLevel parse_level(const std::string& s) {
    if (s == "low") return InstructionLevel::Low;
    if (s == "mid") return InstructionLevel::Mid;
    if (s == "high") return InstructionLevel::High;
    throw Error("unknown instruction level '" + s + "'");
}

enum class DialogueKind { SingleGrasp, MultiMix, MultiGrasp };

inline std::string to_string(DialogueKind kind) {
    switch (kind) {
        case DialogueKind::SingleGrasp: return "single_grasp";
        case DialogueKind::MultiMix: return "multi_mix";
        case DialogueKind::MultiGrasp: return "multi_grasp";
    }
    return "single_grasp";
}

inline DialogueKind parse_kind(const std::string& s) {
    if (s == "single_grasp") return DialogueKind::SingleGrasp;
    if (s == "multi_mix") return DialogueKind::MultiMix;
    if (s == "multi_grasp") return DialogueKind::MultiGrasp;
    throw Error("unknown dialogue kind '" + s + "'");
}

namespace detail {

inline std::set<std::string> placeholders_in(const std::string& text) {
    std::set<std::string> out;
    std::size_t pos = 0;
    while ((pos = text.find('{', pos)) != std::string::npos) {
        const auto end = text.find('}', pos);
        if (end == std::string::npos) break;
        out.insert(text.substr(pos + 1, end - pos - 1));
        pos = end + 1;
    }
    return out;
}

inline std::string substitute(std::string text,
                              const std::map<std::string, std::string>& values) {
    for (const auto& [key, value] : values) {
        const std::string needle = "{" + key + "}";
        std::size_t pos = 0;
        while ((pos = text.find(needle, pos)) != std::string::npos) {
            text.replace(pos, needle.size(), value);
            pos += value.size();
        }
    }
    return text;
}

}  // namespace detail

// Question/answer templates per instruction level. Placeholders a level may
// use: low {object} {hand}; mid adds {part}; high adds {contact}. Grasp
// answers must embed exactly one {stream}; caption answers use {caption}.
struct TemplateSet {
    int version = 1;
    std::map<InstructionLevel, std::vector<std::string>> questions;
    std::vector<std::string> grasp_answers;
    std::vector<std::string> caption_questions;
    std::vector<std::string> caption_answers;

    void validate() const {
        static const std::map<InstructionLevel, std::set<std::string>> allowed = {
            {InstructionLevel::Low, {"object", "hand"}},
            {InstructionLevel::Mid, {"object", "hand", "part"}},
            {InstructionLevel::High, {"object", "hand", "part", "contact"}},
        };
        for (const auto& [level, fields] : allowed) {
            auto it = questions.find(level);
            if (it == questions.end() || it->second.empty())
                throw SchemaError("no question templates for level " + to_string(level));
            for (const auto& t : it->second)
                for (const auto& ph : detail::placeholders_in(t))
                    if (!fields.count(ph))
                        throw SchemaError("template '" + t + "' uses placeholder {" + ph +
                                          "} not allowed at level " + to_string(level));
        }
        if (grasp_answers.empty()) throw SchemaError("no grasp answer templates");
        for (const auto& t : grasp_answers) {
            std::size_t count = 0, pos = 0;
            while ((pos = t.find("{stream}", pos)) != std::string::npos) {
                ++count;
                pos += 8;
            }
            if (count != 1)
                throw SchemaError("grasp answer template must embed exactly one {stream}: '" +
                                  t + "'");
        }
        if (caption_questions.empty() || caption_answers.empty())
            throw SchemaError("caption templates missing");
    }

    // Curated defaults; the first template of each level is the canonical
    // phrasing the rest of the toolkit's fixtures rely on.
    static TemplateSet builtin() {
        TemplateSet t;
        t.questions[InstructionLevel::Low] = {
            "How do you grasp the {object} using the {hand}?",
            "How can the {hand} grasp the {object}?",
            "Show a way for the {hand} to pick up the {object}.",
        };
        t.questions[InstructionLevel::Mid] = {
            "How do you grasp the {part} of the {object} using the {hand}?",
            "How can we use the {hand} to grasp a {object} by its {part}?",
            "Give a grasp for the {hand} that holds the {object} by the {part}.",
        };
        t.questions[InstructionLevel::High] = {
            "Demonstrate the ideal pose of the {hand} to grasp the {object}: {contact}",
            "How can the {hand} securely grasp the {object} when {contact}?",
            "What is the ideal grasping pose for the {hand} when {contact} with the {object}?",
        };
        t.grasp_answers = {
            "Here is a grasp for the {hand}: {stream}",
            "The {hand} can take the {object} like this: {stream}",
        };
        t.caption_questions = {
            "What object is shown in the point cloud?",
            "Describe the object in front of the robot.",
        };
        t.caption_answers = {
            "{caption}",
        };
        return t;
    }
};

inline TemplateSet parse_templates(const nlohmann::json& doc) {
    TemplateSet t;
    t.version = doc.value("version", 1);
    for (const auto& level :
         {InstructionLevel::Low, InstructionLevel::Mid, InstructionLevel::High}) {
        const std::string key = to_string(level);
        if (doc.contains("questions") && doc["questions"].contains(key))
            t.questions[level] = doc["questions"][key].get<std::vector<std::string>>();
    }
    if (doc.contains("grasp_answers"))
        t.grasp_answers = doc["grasp_answers"].get<std::vector<std::string>>();
    if (doc.contains("caption_questions"))
        t.caption_questions = doc["caption_questions"].get<std::vector<std::string>>();
    if (doc.contains("caption_answers"))
        t.caption_answers = doc["caption_answers"].get<std::vector<std::string>>();
    t.validate();
    return t;
}

inline TemplateSet load_templates(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open template file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("template JSON parse failure: ") + e.what());
    }
    return parse_templates(doc);
}

inline nlohmann::ordered_json to_json(const TemplateSet& t) {
    nlohmann::ordered_json j;
    j["version"] = t.version;
    nlohmann::ordered_json q;
    for (const auto& [level, list] : t.questions) q[to_string(level)] = list;
    j["questions"] = std::move(q);
    j["grasp_answers"] = t.grasp_answers;
    j["caption_questions"] = t.caption_questions;
    j["caption_answers"] = t.caption_answers;
    return j;
}

// One question at the requested level, chosen by seed. Mid needs the
// summary's primary part, high needs the full contact text.
inline std::string fill_template(InstructionLevel level, const std::string& object_name,
                                 const std::string& hand_name, const ContactSummary* summary,
                                 const TemplateSet& templates, std::uint64_t seed) {
    auto it = templates.questions.find(level);
    if (it == templates.questions.end() || it->second.empty())
        throw Error("no templates for level " + to_string(level));
    std::map<std::string, std::string> values = {{"object", object_name},
                                                 {"hand", hand_name}};
    if (level != InstructionLevel::Low) {
        if (!summary) throw Error("level " + to_string(level) + " requires a contact summary");
        values["part"] = summary->primary_part;
        if (level == InstructionLevel::High) values["contact"] = summary->text;
    }
    const auto& list = it->second;
    const std::string chosen = list[Rng(seed).next_below(list.size())];
    const std::string filled = detail::substitute(chosen, values);
    if (filled.find('{') != std::string::npos)
        throw Error("template left unfilled placeholders: '" + filled + "'");
    return filled;
}

// Every distinct question available for one grasp across the allowed levels.
inline std::vector<std::string> question_variants(
    const std::vector<InstructionLevel>& levels, const std::string& object_name,
    const std::string& hand_name, const ContactSummary& summary,
    const TemplateSet& templates) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto level : levels) {
        const auto& list = templates.questions.at(level);
        for (std::size_t i = 0; i < list.size(); ++i) {
            std::map<std::string, std::string> values = {{"object", object_name},
                                                         {"hand", hand_name}};
            if (level != InstructionLevel::Low) values["part"] = summary.primary_part;
            if (level == InstructionLevel::High) values["contact"] = summary.text;
            const std::string q = detail::substitute(list[i], values);
            if (seen.insert(q).second) out.push_back(q);
        }
    }
    return out;
}

struct Turn {
    std::string role;  // "user" | "assistant"
    std::string text;
    std::string stream_text;  // non-empty iff the turn embeds a token stream
};

struct GraspRef {
    std::string grasp_id;
    std::string hand;
    std::string object;
    InstructionLevel level = InstructionLevel::Low;
    std::vector<int> bins;
    int scale_bin = 0;
    std::uint64_t spec_hash = 0;
};

struct ConversationSample {
    std::string id;
    DialogueKind kind = DialogueKind::SingleGrasp;
    std::string stage;  // "alignment" | "instruct"
    std::vector<Turn> turns;
    std::vector<GraspRef> grasps;
};

// One grasp's worth of generation context.
struct GraspBundleItem {
    std::string grasp_id;
    std::string object_name;
    std::string hand_name;      // model name, for tokens
    std::string hand_display;   // display name, for text
    InstructionLevel level = InstructionLevel::Low;
    ContactSummary summary;
    BinVector bins;
    double scale_m = 0.0;
    std::uint64_t spec_hash = 0;
};

namespace detail {

inline Turn make_grasp_answer(const GraspBundleItem& item, const TemplateSet& templates,
                              const TokenVocabulary& vocab, Rng& rng) {
    const TokenStream stream = tokenize(item.bins, item.scale_m, vocab);
    const std::string stream_text = stream.to_text();
    const auto& list = templates.grasp_answers;
    std::string text = list[rng.next_below(list.size())];
    text = substitute(text, {{"stream", stream_text},
                             {"hand", item.hand_display},
                             {"object", item.object_name}});
    return Turn{"assistant", text, stream_text};
}

inline GraspRef make_ref(const GraspBundleItem& item, const TokenVocabulary& vocab) {
    GraspRef ref;
    ref.grasp_id = item.grasp_id;
    ref.hand = item.hand_name;
    ref.object = item.object_name;
    ref.level = item.level;
    ref.bins = item.bins.bins;
    ref.scale_bin = vocab.scale_to_bin(item.scale_m, item.bins.n_bins);
    ref.spec_hash = item.spec_hash;
    return ref;
}

}  // namespace detail

// Assemble one conversation. single_grasp takes exactly one grasp;
// multi_grasp at least two (hands may differ); multi_mix opens with a caption
// turn, then carries at least one grasp.
inline ConversationSample build_sample(DialogueKind kind,
                                       const std::vector<GraspBundleItem>& items,
                                       const std::optional<std::string>& caption,
                                       const TemplateSet& templates,
                                       const TokenVocabulary& vocab, std::uint64_t seed,
                                       const std::string& sample_id) {
    switch (kind) {
        case DialogueKind::SingleGrasp:
            if (items.size() != 1)
                throw Error("single_grasp takes exactly one grasp, got " +
                            std::to_string(items.size()));
            break;
        case DialogueKind::MultiGrasp:
            if (items.size() < 2)
                throw Error("multi_grasp takes at least two grasps, got " +
                            std::to_string(items.size()));
            break;
        case DialogueKind::MultiMix:
            if (!caption) throw Error("multi_mix requires an object caption");
            if (items.empty()) throw Error("multi_mix takes at least one grasp");
            break;
    }

    ConversationSample sample;
    sample.id = sample_id;
    sample.kind = kind;
    sample.stage = kind == DialogueKind::SingleGrasp ? "alignment" : "instruct";

    Rng rng(seed);
    if (kind == DialogueKind::MultiMix) {
        const std::string q =
            templates.caption_questions[rng.next_below(templates.caption_questions.size())];
        std::string a =
            templates.caption_answers[rng.next_below(templates.caption_answers.size())];
        a = detail::substitute(a, {{"caption", *caption}});
        sample.turns.push_back(Turn{"user", q, ""});
        sample.turns.push_back(Turn{"assistant", a, ""});
    }
    for (const auto& item : items) {
        const ContactSummary* summary = &item.summary;
        const std::string question =
            fill_template(item.level, item.object_name, item.hand_display,
                          item.level == InstructionLevel::Low ? nullptr : summary, templates,
                          rng.next_u64());
        sample.turns.push_back(Turn{"user", question, ""});
        sample.turns.push_back(detail::make_grasp_answer(item, templates, vocab, rng));
        sample.grasps.push_back(detail::make_ref(item, vocab));
    }
    return sample;
}

// --- polish hook -----------------------------------------------------------

using PolishHook = std::function<std::string(const std::string&)>;

inline PolishHook identity_polish() {
    return [](const std::string& s) { return s; };
}

struct PolishResult {
    std::string text;
    bool accepted = true;
    std::string warning;
};

// Run an external rewriter over `text`. The rewrite is rejected (original
// kept) unless every protected substring (substituted values, embedded token
// streams) survives byte for byte.
inline PolishResult apply_polish(const std::string& text,
                                 const std::vector<std::string>& protected_substrings,
                                 const PolishHook& hook) {
    PolishResult out;
    if (!hook) {
        out.text = text;
        return out;
    }
    const std::string rewritten = hook(text);
    for (const auto& keep : protected_substrings) {
        if (keep.empty()) continue;
        if (rewritten.find(keep) == std::string::npos) {
            out.text = text;
            out.accepted = false;
            out.warning = "polish hook dropped protected text '" + keep + "'; original kept";
            return out;
        }
    }
    out.text = rewritten;
    return out;
}

// --- serialization -----------------------------------------------------------

inline nlohmann::ordered_json to_json(const ConversationSample& s) {
    nlohmann::ordered_json j;
    j["schema_version"] = kConversationSchemaVersion;
    j["id"] = s.id;
    j["kind"] = to_string(s.kind);
    j["stage"] = s.stage;
    nlohmann::ordered_json turns = nlohmann::ordered_json::array();
    for (const auto& t : s.turns) {
        nlohmann::ordered_json tj;
        tj["role"] = t.role;
        tj["text"] = t.text;
        turns.push_back(std::move(tj));
    }
    j["turns"] = std::move(turns);
    nlohmann::ordered_json meta;
    if (!s.grasps.empty()) {
        const GraspRef& first = s.grasps.front();
        meta["hand"] = first.hand;
        meta["object"] = first.object;
        meta["level"] = to_string(first.level);
        meta["grasp_id"] = first.grasp_id;
        meta["bins"] = first.bins;
        meta["scale_bin"] = first.scale_bin;
        meta["spec_hash"] = hash_hex(first.spec_hash);
        if (s.grasps.size() > 1) {
            nlohmann::ordered_json extra = nlohmann::ordered_json::array();
            for (const auto& g : s.grasps) {
                nlohmann::ordered_json gj;
                gj["hand"] = g.hand;
                gj["object"] = g.object;
                gj["level"] = to_string(g.level);
                gj["grasp_id"] = g.grasp_id;
                gj["bins"] = g.bins;
                gj["scale_bin"] = g.scale_bin;
                gj["spec_hash"] = hash_hex(g.spec_hash);
                extra.push_back(std::move(gj));
            }
            meta["grasps"] = std::move(extra);
        }
    }
    j["meta"] = std::move(meta);
    return j;
}

}  // namespace graspkit

#endif
