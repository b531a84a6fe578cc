#ifndef GRASPKIT_CODEC_HPP
#define GRASPKIT_CODEC_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "graspkit/error.hpp"
#include "graspkit/hand.hpp"
#include "graspkit/random.hpp"

namespace graspkit {

inline constexpr int kBinSpecSchemaVersion = 1;

// Pose as a flat vector in fixed dimension order: tx ty tz rx ry rz theta_0..
inline std::vector<double> pose_to_vector(const GraspPose& pose) {
    std::vector<double> v;
    v.reserve(6 + pose.theta.size());
    v.push_back(pose.T.x);
    v.push_back(pose.T.y);
    v.push_back(pose.T.z);
    v.push_back(pose.R.x);
    v.push_back(pose.R.y);
    v.push_back(pose.R.z);
    v.insert(v.end(), pose.theta.begin(), pose.theta.end());
    return v;
}

inline GraspPose vector_to_pose(const std::string& hand, const std::vector<double>& v) {
    GraspPose pose;
    pose.hand = hand;
    pose.T = {v[0], v[1], v[2]};
    pose.R = {v[3], v[4], v[5]};
    pose.theta.assign(v.begin() + 6, v.end());
    return pose;
}

inline std::vector<std::string> dimension_names(std::size_t dof) {
    std::vector<std::string> names = {"tx", "ty", "tz", "rx", "ry", "rz"};
    for (std::size_t i = 0; i < dof; ++i) names.push_back("theta_" + std::to_string(i));
    return names;
}

// Per-hand, per-dimension quantization bounds. widths satisfy
// width(i) * n_bins == upper[i] - lower[i] up to rounding.
struct BinSpec {
    std::string hand;
    int n_bins = 0;
    std::vector<std::string> dims;
    std::vector<double> lower;
    std::vector<double> upper;
    std::size_t corpus_size = 0;
    std::uint64_t corpus_hash = 0;

    std::size_t dim_count() const { return dims.size(); }
    std::size_t dof() const { return dims.size() - 6; }
    double width(std::size_t i) const { return (upper[i] - lower[i]) / n_bins; }
};

struct BinVector {
    std::string hand;
    int n_bins = 0;
    std::vector<int> bins;
};

inline std::uint64_t pose_content_hash(const GraspPose& pose) {
    std::uint64_t h = fnv1a(pose.hand.data(), pose.hand.size());
    const auto v = pose_to_vector(pose);
    h = fnv1a(v.data(), v.size() * sizeof(double), h);
    return h;
}

// L/U are per-dimension min/max over the corpus. Constant dimensions widen by
// +-1e-6 so every width stays positive. The hash is an order-independent sum
// of per-pose hashes, so shuffled corpora produce identical specs.
inline BinSpec compute_bounds(const std::vector<GraspPose>& poses, int n_bins) {
    if (poses.empty()) throw Error("cannot compute bounds over an empty corpus");
    if (n_bins < 1) throw Error("bin count must be >= 1");
    const std::string& hand = poses.front().hand;
    const std::size_t dof = poses.front().theta.size();

    BinSpec spec;
    spec.hand = hand;
    spec.n_bins = n_bins;
    spec.dims = dimension_names(dof);
    spec.lower.assign(spec.dims.size(), 1e300);
    spec.upper.assign(spec.dims.size(), -1e300);
    spec.corpus_size = poses.size();

    std::uint64_t hash_sum = 0;
    for (const auto& pose : poses) {
        if (pose.hand != hand)
            throw Error("corpus mixes hands '" + hand + "' and '" + pose.hand + "'");
        if (pose.theta.size() != dof)
            throw Error("corpus mixes theta arities for hand '" + hand + "'");
        const auto v = pose_to_vector(pose);
        for (std::size_t i = 0; i < v.size(); ++i) {
            spec.lower[i] = std::min(spec.lower[i], v[i]);
            spec.upper[i] = std::max(spec.upper[i], v[i]);
        }
        hash_sum += pose_content_hash(pose);
    }
    spec.corpus_hash = hash_sum;

    constexpr double kDegenerateHalfWidth = 1e-6;
    for (std::size_t i = 0; i < spec.dims.size(); ++i) {
        if (spec.lower[i] == spec.upper[i]) {
            spec.lower[i] -= kDegenerateHalfWidth;
            spec.upper[i] += kDegenerateHalfWidth;
        }
    }
    return spec;
}

// bins[i] = clamp(floor((p[i] - L[i]) / W[i]), 0, N-1). Out-of-range values
// clamp; `out_of_range_count`, when given, receives how many did.
inline BinVector discretize(const GraspPose& pose, const BinSpec& spec,
                            int* out_of_range_count = nullptr) {
    if (pose.hand != spec.hand)
        throw Error("pose hand '" + pose.hand + "' does not match spec hand '" + spec.hand +
                    "'");
    const auto v = pose_to_vector(pose);
    if (v.size() != spec.dim_count())
        throw Error("pose has " + std::to_string(v.size()) + " dims, spec has " +
                    std::to_string(spec.dim_count()));
    BinVector out;
    out.hand = spec.hand;
    out.n_bins = spec.n_bins;
    out.bins.reserve(v.size());
    int clamped = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] < spec.lower[i] || v[i] > spec.upper[i]) ++clamped;
        // Clamp in double space: far out-of-range values would overflow an
        // int cast when the dimension's width is tiny.
        const double raw = std::floor((v[i] - spec.lower[i]) / spec.width(i));
        const int b = raw <= 0.0 ? 0
                      : raw >= double(spec.n_bins) ? spec.n_bins - 1
                                                   : static_cast<int>(raw);
        out.bins.push_back(b);
    }
    if (out_of_range_count) *out_of_range_count = clamped;
    return out;
}

enum class ReconstructMode {
    LowerEdge,  // p[i] = L[i] + B[i] * W[i]
    Center      // p[i] = L[i] + (B[i] + 0.5) * W[i]
};

inline GraspPose dediscretize(const BinVector& bins, const BinSpec& spec,
                              ReconstructMode mode = ReconstructMode::Center) {
    if (bins.hand != spec.hand)
        throw Error("bin vector hand '" + bins.hand + "' does not match spec hand '" +
                    spec.hand + "'");
    if (bins.bins.size() != spec.dim_count())
        throw Error("bin vector has " + std::to_string(bins.bins.size()) + " dims, spec has " +
                    std::to_string(spec.dim_count()));
    std::vector<double> v(spec.dim_count());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const int b = bins.bins[i];
        if (b < 0 || b >= spec.n_bins)
            throw Error("bin " + std::to_string(b) + " out of [0, " +
                        std::to_string(spec.n_bins - 1) + "] in dimension " + spec.dims[i]);
        const double offset = mode == ReconstructMode::Center ? b + 0.5 : double(b);
        v[i] = spec.lower[i] + offset * spec.width(i);
    }
    return vector_to_pose(spec.hand, v);
}

inline ReconstructMode parse_reconstruct_mode(const std::string& s) {
    if (s == "center") return ReconstructMode::Center;
    if (s == "lower" || s == "lower_edge") return ReconstructMode::LowerEdge;
    throw Error("unknown reconstruction mode '" + s + "' (expected 'center' or 'lower')");
}

// --- token stream --------------------------------------------------------

// Special-token vocabulary: one token per hand, N scale tokens, N grasp bin
// tokens, and the begin/end structural pair. Sized to the largest bin count
// in use (512 by default) so one vocabulary serves smaller configurations.
struct TokenVocabulary {
    std::vector<std::string> hands;
    int n_bins = 512;
    double scale_lo = 0.01;  // object bounding-sphere diameter range, meters
    double scale_hi = 1.0;

    static constexpr const char* kBeginGrasp = "<grasp>";
    static constexpr const char* kEndGrasp = "</grasp>";

    bool has_hand(const std::string& hand) const {
        return std::find(hands.begin(), hands.end(), hand) != hands.end();
    }

    std::string hand_token(const std::string& hand) const { return "<hand:" + hand + ">"; }
    std::string scale_token(int bin) const { return "<scale:" + std::to_string(bin) + ">"; }
    std::string bin_token(int bin) const { return "<bin:" + std::to_string(bin) + ">"; }

    // Scale quantization follows the grasp-bin rule: floor then clamp.
    int scale_to_bin(double scale_m, int n) const {
        const double raw = std::floor((scale_m - scale_lo) / ((scale_hi - scale_lo) / n));
        return raw <= 0.0 ? 0 : raw >= double(n) ? n - 1 : static_cast<int>(raw);
    }

    double scale_bin_center(int bin, int n) const {
        const double w = (scale_hi - scale_lo) / n;
        return scale_lo + (bin + 0.5) * w;
    }

    // token <-> id bijection: 0 <grasp>, 1 </grasp>, hands, scales, bins.
    int id_of(const std::string& token) const {
        if (token == kBeginGrasp) return 0;
        if (token == kEndGrasp) return 1;
        for (std::size_t h = 0; h < hands.size(); ++h)
            if (token == hand_token(hands[h])) return 2 + static_cast<int>(h);
        const int base = 2 + static_cast<int>(hands.size());
        int value = -1;
        if (parse_indexed(token, "scale", value) && value >= 0 && value < n_bins)
            return base + value;
        if (parse_indexed(token, "bin", value) && value >= 0 && value < n_bins)
            return base + n_bins + value;
        return -1;
    }

    std::string token_of(int id) const {
        if (id < 0) throw Error("token id out of range");
        if (id == 0) return kBeginGrasp;
        if (id == 1) return kEndGrasp;
        id -= 2;
        if (id < static_cast<int>(hands.size())) return hand_token(hands[static_cast<std::size_t>(id)]);
        id -= static_cast<int>(hands.size());
        if (id < n_bins) return scale_token(id);
        id -= n_bins;
        if (id < n_bins) return bin_token(id);
        throw Error("token id out of range");
    }

    int size() const { return 2 + static_cast<int>(hands.size()) + 2 * n_bins; }

    static bool parse_indexed(const std::string& token, const std::string& kind, int& value) {
        const std::string prefix = "<" + kind + ":";
        if (token.size() < prefix.size() + 2 || token.back() != '>') return false;
        if (token.compare(0, prefix.size(), prefix) != 0) return false;
        const std::string digits = token.substr(prefix.size(), token.size() - prefix.size() - 1);
        if (digits.empty() || digits.size() > 9) return false;
        if (digits.size() > 1 && digits[0] == '0') return false;  // canonical form only
        for (char c : digits)
            if (c < '0' || c > '9') return false;
        value = std::stoi(digits);
        return true;
    }

    static bool parse_hand_token(const std::string& token, std::string& hand) {
        if (token.size() < 8 || token.compare(0, 6, "<hand:") != 0 || token.back() != '>')
            return false;
        hand = token.substr(6, token.size() - 7);
        return !hand.empty();
    }
};

// Text form: `<hand:NAME> <scale:K> <grasp> <bin:K>{6+d} </grasp> [free text]`.
struct TokenStream {
    std::vector<std::string> tokens;
    std::string commentary;  // free text after </grasp>, verbatim

    std::string to_text() const {
        std::string out;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (i) out += ' ';
            out += tokens[i];
        }
        if (!commentary.empty()) {
            out += ' ';
            out += commentary;
        }
        return out;
    }

    std::vector<int> to_ids(const TokenVocabulary& vocab) const {
        std::vector<int> ids;
        ids.reserve(tokens.size());
        for (const auto& t : tokens) {
            const int id = vocab.id_of(t);
            if (id < 0) throw Error("token '" + t + "' is not in the vocabulary");
            ids.push_back(id);
        }
        return ids;
    }

    static TokenStream from_ids(const std::vector<int>& ids, const TokenVocabulary& vocab) {
        TokenStream s;
        s.tokens.reserve(ids.size());
        for (int id : ids) s.tokens.push_back(vocab.token_of(id));
        return s;
    }
};

// Split a text stream into tokens and trailing commentary. Everything up to
// and including the first </grasp> is token material; the rest is commentary,
// preserved byte for byte (minus the single separating space).
inline TokenStream parse_stream_text(const std::string& text) {
    TokenStream out;
    std::size_t pos = 0;
    const auto skip_ws = [&] {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
    };
    skip_ws();
    while (pos < text.size()) {
        std::size_t end = pos;
        while (end < text.size() && text[end] != ' ' && text[end] != '\t') ++end;
        const std::string item = text.substr(pos, end - pos);
        out.tokens.push_back(item);
        pos = end;
        skip_ws();
        if (item == TokenVocabulary::kEndGrasp) {
            out.commentary = text.substr(pos);
            break;
        }
    }
    return out;
}

inline TokenStream tokenize(const BinVector& bins, double scale_m,
                            const TokenVocabulary& vocab) {
    if (!vocab.has_hand(bins.hand))
        throw Error("hand '" + bins.hand + "' is not in the token vocabulary");
    if (bins.n_bins > vocab.n_bins)
        throw Error("bin vector uses " + std::to_string(bins.n_bins) +
                    " bins, vocabulary has " + std::to_string(vocab.n_bins));
    TokenStream s;
    s.tokens.reserve(bins.bins.size() + 4);
    s.tokens.push_back(vocab.hand_token(bins.hand));
    s.tokens.push_back(vocab.scale_token(vocab.scale_to_bin(scale_m, bins.n_bins)));
    s.tokens.push_back(TokenVocabulary::kBeginGrasp);
    for (int b : bins.bins) {
        if (b < 0 || b >= vocab.n_bins)
            throw Error("bin " + std::to_string(b) + " outside vocabulary range");
        s.tokens.push_back(vocab.bin_token(b));
    }
    s.tokens.push_back(TokenVocabulary::kEndGrasp);
    return s;
}

struct DecodeResult {
    GraspPose pose;
    BinVector bins;
    int scale_bin = 0;
    double scale_m = 0.0;  // scale bin center
    std::string commentary;
};

// Grammar-validating inverse of tokenize. Streams with trailing text after
// </grasp> parse; anything malformed raises StreamError with the offending
// token position.
inline DecodeResult detokenize(const TokenStream& stream, const TokenVocabulary& vocab,
                               const std::map<std::string, BinSpec>& specs,
                               ReconstructMode mode = ReconstructMode::Center) {
    const auto& toks = stream.tokens;
    if (toks.empty()) throw StreamError("empty stream: expected hand token", 0);

    std::string hand;
    if (!TokenVocabulary::parse_hand_token(toks[0], hand))
        throw StreamError("expected hand token '<hand:NAME>', got '" + toks[0] + "'", 0);
    if (!vocab.has_hand(hand))
        throw StreamError("unknown hand '" + hand + "'", 0);
    auto sit = specs.find(hand);
    if (sit == specs.end())
        throw StreamError("no bin spec for hand '" + hand + "'", 0);
    const BinSpec& spec = sit->second;

    if (toks.size() < 2) throw StreamError("stream ends before scale token", 1);
    int scale_bin = -1;
    if (!TokenVocabulary::parse_indexed(toks[1], "scale", scale_bin))
        throw StreamError("expected scale token '<scale:K>', got '" + toks[1] + "'", 1);
    if (scale_bin < 0 || scale_bin >= spec.n_bins)
        throw StreamError("scale bin " + std::to_string(scale_bin) + " outside [0, " +
                          std::to_string(spec.n_bins - 1) + "]", 1);

    if (toks.size() < 3 || toks[2] != TokenVocabulary::kBeginGrasp)
        throw StreamError("expected '<grasp>'", 2);

    const std::size_t expected = spec.dim_count();
    BinVector bins;
    bins.hand = hand;
    bins.n_bins = spec.n_bins;
    std::size_t i = 3;
    for (; i < toks.size() && toks[i] != TokenVocabulary::kEndGrasp; ++i) {
        int b = -1;
        if (!TokenVocabulary::parse_indexed(toks[i], "bin", b))
            throw StreamError("expected bin token, got '" + toks[i] + "'", i);
        if (b >= vocab.n_bins)
            throw StreamError("bin " + std::to_string(b) + " outside vocabulary range", i);
        if (b >= spec.n_bins)
            throw StreamError("bin " + std::to_string(b) + " outside spec range [0, " +
                              std::to_string(spec.n_bins - 1) + "]", i);
        bins.bins.push_back(b);
    }
    if (i == toks.size())
        throw StreamError("stream ends before '</grasp>'", i);
    if (bins.bins.size() != expected)
        throw StreamError("arity mismatch: hand '" + hand + "' needs " +
                          std::to_string(expected) + " bins, stream has " +
                          std::to_string(bins.bins.size()), i);

    DecodeResult out;
    out.bins = bins;
    out.scale_bin = scale_bin;
    out.scale_m = vocab.scale_bin_center(scale_bin, spec.n_bins);
    out.commentary = stream.commentary;
    out.pose = dediscretize(bins, spec, mode);
    return out;
}

inline DecodeResult detokenize_text(const std::string& text, const TokenVocabulary& vocab,
                                    const std::map<std::string, BinSpec>& specs,
                                    ReconstructMode mode = ReconstructMode::Center) {
    return detokenize(parse_stream_text(text), vocab, specs, mode);
}

// --- BinSpec persistence ---------------------------------------------------

inline std::string hash_hex(std::uint64_t h) {
    std::ostringstream os;
    os << std::hex << h;
    return "0x" + os.str();
}

inline nlohmann::ordered_json to_json(const BinSpec& spec) {
    nlohmann::ordered_json j;
    j["schema_version"] = kBinSpecSchemaVersion;
    j["hand"] = spec.hand;
    j["n_bins"] = spec.n_bins;
    j["dims"] = spec.dims;
    j["lower"] = spec.lower;
    j["upper"] = spec.upper;
    j["corpus_size"] = spec.corpus_size;
    j["corpus_hash"] = hash_hex(spec.corpus_hash);
    return j;
}

inline BinSpec bin_spec_from_json(const nlohmann::json& j) {
    BinSpec spec;
    spec.hand = j.at("hand").get<std::string>();
    spec.n_bins = j.at("n_bins").get<int>();
    spec.dims = j.at("dims").get<std::vector<std::string>>();
    spec.lower = j.at("lower").get<std::vector<double>>();
    spec.upper = j.at("upper").get<std::vector<double>>();
    spec.corpus_size = j.at("corpus_size").get<std::size_t>();
    spec.corpus_hash = std::stoull(j.at("corpus_hash").get<std::string>(), nullptr, 16);
    if (spec.lower.size() != spec.dims.size() || spec.upper.size() != spec.dims.size())
        throw SchemaError("bin spec bound arrays do not match dims");
    for (std::size_t i = 0; i < spec.dims.size(); ++i)
        if (!(spec.lower[i] < spec.upper[i]))
            throw SchemaError("bin spec has lower >= upper in dimension " + spec.dims[i]);
    return spec;
}

inline void save_bin_spec(const BinSpec& spec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write bin spec: " + path);
    out << to_json(spec).dump(2) << "\n";
}

inline BinSpec load_bin_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open bin spec: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("bin spec JSON parse failure: ") + e.what());
    }
    return bin_spec_from_json(doc);
}

}  // namespace graspkit

#endif
