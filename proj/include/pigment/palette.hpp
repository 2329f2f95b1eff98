// SPDX-License-Identifier: Apache-2.0
#pragma once

// Palette geometry: prompt circles, the mix/detach gestures, selection
// points resolved to mix weights, and the dot trail of conditioning used
// at each generation step.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pigment/error.hpp"
#include "pigment/geometry.hpp"
#include "pigment/vecmix.hpp"

namespace pigment {

using NodeId = std::string;

inline constexpr double kDefaultNodeRadius = 24.0;

struct PromptNode {
    NodeId id;
    std::string text;
    Color color;
    Vec2 center;
    double radius = kDefaultNodeRadius;

    friend bool operator==(const PromptNode&, const PromptNode&) = default;
};

// Two or three mixed prompts. Member order fixes the order of the weights.
struct MixGroup {
    std::string id;
    std::vector<NodeId> members;

    friend bool operator==(const MixGroup&, const MixGroup&) = default;
};

// A directional slider as the palette sees it: end prompts as text.
struct AxisSetting {
    std::string id;
    std::string text_a;
    std::string text_b;
    Color color_a;
    Color color_b;
    double weight = 0.0;

    friend bool operator==(const AxisSetting&, const AxisSetting&) = default;
};

class PaletteState {
public:
    std::vector<PromptNode> nodes;
    std::vector<MixGroup> groups;
    std::uint64_t next_group = 1;

    const PromptNode* find(const NodeId& id) const {
        auto it = std::find_if(nodes.begin(), nodes.end(), [&](const auto& n) { return n.id == id; });
        return it == nodes.end() ? nullptr : &*it;
    }

    const PromptNode& node(const NodeId& id) const {
        if (const auto* n = find(id)) return *n;
        throw ContractError("unknown_node", "no prompt node '" + id + "'");
    }

    PromptNode& node(const NodeId& id) { return const_cast<PromptNode&>(std::as_const(*this).node(id)); }

    const MixGroup* find_group(const std::string& id) const {
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.id == id; });
        return it == groups.end() ? nullptr : &*it;
    }

    const MixGroup* group_of(const NodeId& id) const {
        for (const auto& g : groups) {
            if (std::find(g.members.begin(), g.members.end(), id) != g.members.end()) return &g;
        }
        return nullptr;
    }

    void add_node(PromptNode n) {
        if (find(n.id)) throw ContractError("duplicate_node", "prompt node '" + n.id + "' already exists");
        if (!(n.radius > 0.0)) throw ContractError("bad_radius", "prompt node radius must be positive");
        nodes.push_back(std::move(n));
    }

    // Removing a member shrinks its group; a pair left with one member dissolves.
    void remove_node(const NodeId& id) {
        node(id);
        detach(id);
        std::erase_if(nodes, [&](const auto& n) { return n.id == id; });
    }

    void detach(const NodeId& id) {
        for (auto& g : groups) std::erase(g.members, id);
        std::erase_if(groups, [](const auto& g) { return g.members.size() < 2; });
    }

    std::string add_group(std::vector<NodeId> members) {
        std::string id = "g" + std::to_string(next_group++);
        groups.push_back({id, std::move(members)});
        return id;
    }

    friend bool operator==(const PaletteState&, const PaletteState&) = default;
};

namespace detail {

inline double distance_to_segment(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 d = b - a;
    const double len2 = dot(d, d);
    const double t = len2 > 0.0 ? std::clamp(dot(p - a, d) / len2, 0.0, 1.0) : 0.0;
    return distance(p, a + t * d);
}

// The gradient band drawn between a pair: a capsule whose half-width is the
// smaller member radius.
inline bool in_pair_region(const PaletteState& s, const MixGroup& g, Vec2 p, double* how_far) {
    const auto& a = s.node(g.members[0]);
    const auto& b = s.node(g.members[1]);
    const double d = distance_to_segment(p, a.center, b.center);
    *how_far = d;
    return d <= std::min(a.radius, b.radius);
}

}  // namespace detail

// Drop `moved` at `new_center` and apply the mixing gestures:
//   free node on free node (circles overlap)       -> new pair
//   free node with its centre on a pair's gradient -> triple
//   group member dropped onto a fellow member      -> that fellow detaches
// Anything else only moves the node.
inline PaletteState contact(const PaletteState& state, const NodeId& moved, Vec2 new_center) {
    PaletteState next = state;
    auto& mover = next.node(moved);
    mover.center = new_center;

    if (const MixGroup* own = next.group_of(moved)) {
        const NodeId* victim = nullptr;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& id : own->members) {
            if (id == moved) continue;
            const auto& other = next.node(id);
            const double d = distance(new_center, other.center);
            if (d <= other.radius && d < best) {
                best = d;
                victim = &id;
            }
        }
        if (victim) next.detach(NodeId(*victim));
        return next;
    }

    const MixGroup* pair = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : next.groups) {
        double d = 0.0;
        if (g.members.size() == 2 && detail::in_pair_region(next, g, new_center, &d) && d < best) {
            best = d;
            pair = &g;
        }
    }
    if (pair) {
        const std::string id = pair->id;
        for (auto& g : next.groups) {
            if (g.id == id) g.members.push_back(moved);
        }
        return next;
    }

    const PromptNode* partner = nullptr;
    best = std::numeric_limits<double>::infinity();
    for (const auto& n : next.nodes) {
        if (n.id == moved || next.group_of(n.id)) continue;
        const double d = distance(new_center, n.center);
        if (d <= n.radius + mover.radius && d < best) {
            best = d;
            partner = &n;
        }
    }
    if (partner) next.add_group({partner->id, moved});
    return next;
}

// Weights for a selection point over 1-3 prompt centres. Pairs project the
// point orthogonally onto the centre-to-centre segment; triples use
// barycentric coordinates with negatives clamped and the rest renormalised.
// Degenerate geometry (coincident or collinear centres) yields equal weights.
inline MixWeights weights_at(std::span<const Vec2> centers, Vec2 point) {
    if (!std::isfinite(point.x) || !std::isfinite(point.y)) {
        throw ContractError("bad_point", "selection point must be finite");
    }
    const std::size_t n = centers.size();
    const auto equal = [n] { return MixWeights(std::vector<double>(n, 1.0 / static_cast<double>(n))); };

    switch (n) {
        case 1:
            return MixWeights({1.0});
        case 2: {
            const Vec2 d = centers[1] - centers[0];
            const double len2 = dot(d, d);
            if (len2 <= 0.0) return equal();
            const double t = std::clamp(dot(point - centers[0], d) / len2, 0.0, 1.0);
            return MixWeights({1.0 - t, t});
        }
        case 3: {
            const Vec2 ab = centers[1] - centers[0];
            const Vec2 ac = centers[2] - centers[0];
            const double area2 = cross(ab, ac);
            const double scale = std::max(dot(ab, ab), dot(ac, ac));
            if (scale <= 0.0 || std::abs(area2) <= 1e-12 * scale) return equal();
            const Vec2 ap = point - centers[0];
            std::vector<double> w(3);
            w[1] = cross(ap, ac) / area2;
            w[2] = cross(ab, ap) / area2;
            w[0] = 1.0 - w[1] - w[2];
            double sum = 0.0;
            for (double& x : w) {
                x = std::max(x, 0.0);
                sum += x;
            }
            for (double& x : w) x /= sum;
            return MixWeights(std::move(w));
        }
        default:
            throw ContractError("bad_group", "a mix covers one to three prompts");
    }
}

inline std::vector<Vec2> member_centers(const PaletteState& state, std::span<const NodeId> members) {
    std::vector<Vec2> out;
    for (const auto& id : members) out.push_back(state.node(id).center);
    return out;
}

inline MixWeights weights_at(const PaletteState& state, const MixGroup& group, Vec2 point) {
    return weights_at(member_centers(state, group.members), point);
}

// What the user picked: a single prompt or a point on a group's gradient.
struct Selection {
    std::string target;           // node id or group id
    std::vector<NodeId> members;  // in weight order
    Vec2 point;                   // clamped into the gradient region
    MixWeights weights;

    friend bool operator==(const Selection&, const Selection&) = default;
};

inline Selection select(const PaletteState& state, const std::string& target, Vec2 point) {
    if (const auto* n = state.find(target)) {
        return {target, {n->id}, n->center, MixWeights({1.0})};
    }
    const auto* g = state.find_group(target);
    if (!g) throw ContractError("unknown_target", "no prompt or group '" + target + "'");
    const auto centers = member_centers(state, g->members);
    MixWeights w = weights_at(centers, point);
    Vec2 clamped{};
    for (std::size_t i = 0; i < centers.size(); ++i) clamped = clamped + w[i] * centers[i];
    return {target, g->members, clamped, std::move(w)};
}

// ---------------------------------------------------------------------------
// Path history

struct PathPoint {
    int step_index = 0;
    MixWeights weights;
    std::vector<NodeId> node_ids;
    std::vector<std::pair<std::string, double>> axis_weights;
    Color display_color;

    friend bool operator==(const PathPoint&, const PathPoint&) = default;
};

inline constexpr Color kNeutralPathColor{128, 128, 128};

// Neutral grey pulled toward each axis end colour by |weight|. Positive
// weights pull toward end a. Total pull is capped at 1.
inline Color path_color(std::span<const AxisSetting> axes) {
    double total = 0.0;
    for (const auto& a : axes) total += std::abs(a.weight);
    const double norm = std::max(1.0, total);
    double rgb[3] = {kNeutralPathColor.r, kNeutralPathColor.g, kNeutralPathColor.b};
    for (const auto& a : axes) {
        const Color end = a.weight >= 0.0 ? a.color_a : a.color_b;
        const double share = std::abs(a.weight) / norm;
        rgb[0] += share * (end.r - double{kNeutralPathColor.r});
        rgb[1] += share * (end.g - double{kNeutralPathColor.g});
        rgb[2] += share * (end.b - double{kNeutralPathColor.b});
    }
    const auto to8 = [](double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); };
    return {to8(rgb[0]), to8(rgb[1]), to8(rgb[2])};
}

inline PathPoint make_path_point(int step_index, const MixWeights& weights, std::vector<NodeId> node_ids,
                                 std::span<const AxisSetting> axes) {
    if (step_index < 0) throw ContractError("bad_step", "path step index must be non-negative");
    PathPoint p{step_index, weights, std::move(node_ids), {}, path_color(axes)};
    for (const auto& a : axes) p.axis_weights.emplace_back(a.id, a.weight);
    return p;
}

inline PathPoint make_path_point(int step_index, const Selection& selection, std::span<const AxisSetting> axes) {
    return make_path_point(step_index, selection.weights, selection.members, axes);
}

// Append-only dot trail. Recording a step that already exists (after a
// rollback) replaces it and drops the old forward branch.
class PathHistory {
public:
    const PathPoint& record(PathPoint point) {
        const auto k = static_cast<std::size_t>(point.step_index);
        if (point.step_index < 0 || k > points_.size()) {
            throw ContractError("bad_step", "path point for step " + std::to_string(point.step_index) +
                                                " does not follow step " + std::to_string(points_.size()));
        }
        points_.resize(k);
        points_.push_back(std::move(point));
        return points_.back();
    }

    std::span<const PathPoint> points() const noexcept { return points_; }
    std::size_t size() const noexcept { return points_.size(); }
    bool empty() const noexcept { return points_.empty(); }

    // The dot drawn with a highlight: the step that produced the current latent.
    std::optional<std::size_t> highlighted(int cursor) const {
        if (cursor <= 0 || static_cast<std::size_t>(cursor) > points_.size()) return std::nullopt;
        return static_cast<std::size_t>(cursor - 1);
    }

private:
    std::vector<PathPoint> points_;
};

}  // namespace pigment
