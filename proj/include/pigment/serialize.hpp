// SPDX-License-Identifier: Apache-2.0
#pragma once

// JSON adapters for domain values that cross the gateway or land in project
// files. Positions are [x, y], colours [r, g, b], weights plain arrays.

#include <json.hpp>

#include "pigment/geometry.hpp"
#include "pigment/palette.hpp"
#include "pigment/session.hpp"
#include "pigment/vecmix.hpp"

namespace pigment {

inline void to_json(nlohmann::json& j, const Vec2& v) { j = nlohmann::json::array({v.x, v.y}); }
inline void from_json(const nlohmann::json& j, Vec2& v) {
    v.x = j.at(0).get<double>();
    v.y = j.at(1).get<double>();
}

inline void to_json(nlohmann::json& j, const Color& c) { j = nlohmann::json::array({c.r, c.g, c.b}); }
inline void from_json(const nlohmann::json& j, Color& c) {
    c.r = j.at(0).get<std::uint8_t>();
    c.g = j.at(1).get<std::uint8_t>();
    c.b = j.at(2).get<std::uint8_t>();
}

inline void to_json(nlohmann::json& j, const MixWeights& w) {
    j = std::vector<double>(w.values().begin(), w.values().end());
}
inline void from_json(const nlohmann::json& j, MixWeights& w) { w = MixWeights(j.get<std::vector<double>>()); }

inline void to_json(nlohmann::json& j, const PromptNode& n) {
    j = {{"id", n.id}, {"text", n.text}, {"color", n.color}, {"center", n.center}, {"radius", n.radius}};
}
inline void from_json(const nlohmann::json& j, PromptNode& n) {
    n.id = j.at("id").get<std::string>();
    n.text = j.at("text").get<std::string>();
    n.color = j.value("color", Color{});
    n.center = j.value("center", Vec2{});
    n.radius = j.value("radius", kDefaultNodeRadius);
}

inline void to_json(nlohmann::json& j, const MixGroup& g) { j = {{"id", g.id}, {"members", g.members}}; }
inline void from_json(const nlohmann::json& j, MixGroup& g) {
    g.id = j.at("id").get<std::string>();
    g.members = j.at("members").get<std::vector<NodeId>>();
}

inline void to_json(nlohmann::json& j, const PaletteState& p) {
    j = {{"nodes", p.nodes}, {"groups", p.groups}, {"next_group", p.next_group}};
}
inline void from_json(const nlohmann::json& j, PaletteState& p) {
    p.nodes = j.at("nodes").get<std::vector<PromptNode>>();
    p.groups = j.at("groups").get<std::vector<MixGroup>>();
    p.next_group = j.value("next_group", std::uint64_t{1});
}

inline void to_json(nlohmann::json& j, const Selection& s) {
    j = {{"target", s.target}, {"members", s.members}, {"point", s.point}, {"weights", s.weights}};
}
inline void from_json(const nlohmann::json& j, Selection& s) {
    s.target = j.at("target").get<std::string>();
    s.members = j.at("members").get<std::vector<NodeId>>();
    s.point = j.at("point").get<Vec2>();
    s.weights = j.at("weights").get<MixWeights>();
}

inline void to_json(nlohmann::json& j, const AxisSetting& a) {
    j = {{"id", a.id},           {"text_a", a.text_a},   {"text_b", a.text_b},
         {"color_a", a.color_a}, {"color_b", a.color_b}, {"weight", a.weight}};
}
inline void from_json(const nlohmann::json& j, AxisSetting& a) {
    a.id = j.at("id").get<std::string>();
    a.text_a = j.at("text_a").get<std::string>();
    a.text_b = j.at("text_b").get<std::string>();
    a.color_a = j.value("color_a", Color{});
    a.color_b = j.value("color_b", Color{});
    a.weight = j.value("weight", 0.0);
}

inline void to_json(nlohmann::json& j, const GenerationConfig& c) {
    j = {{"steps", c.steps},
         {"guide_scale", c.guide_scale},
         {"overcoat", c.overcoat},
         {"single_stroke", c.single_stroke},
         {"init_seed", c.init_seed},
         {"overcoat_seed", c.overcoat_seed}};
}
// Missing fields keep their defaults.
inline void from_json(const nlohmann::json& j, GenerationConfig& c) {
    GenerationConfig d;
    c.steps = j.value("steps", d.steps);
    c.guide_scale = j.value("guide_scale", d.guide_scale);
    c.overcoat = j.value("overcoat", d.overcoat);
    c.single_stroke = j.value("single_stroke", d.single_stroke);
    c.init_seed = j.value("init_seed", d.init_seed);
    c.overcoat_seed = j.value("overcoat_seed", d.overcoat_seed);
}

inline void to_json(nlohmann::json& j, const PathPoint& p) {
    j = {{"step", p.step_index},
         {"weights", p.weights},
         {"nodes", p.node_ids},
         {"axes", p.axis_weights},
         {"color", p.display_color}};
}

}  // namespace pigment
