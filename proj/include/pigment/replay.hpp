// SPDX-License-Identifier: Apache-2.0
#pragma once

// Headless, deterministic replay of a scripted client session.
//
// Script:
//   {
//     "backend": {"kind": "toy", "gamma": 0.3, "latent_size": 8},
//     "messages": [
//       {"type": "open"},
//       {"type": "add_prompt", "payload": {...}},
//       {"type": "start", "payload": {"stencil_rect": [x0, y0, x1, y1], "config": {...}}},
//       {"type": "intervene", "after_step": 25, "payload": {...}},
//       ...
//     ]
//   }
//
// The driver stamps seq and session ids, runs the gateway in manual mode and
// lets the generation advance until the cursor reaches `after_step` before
// sending a message. After the last message the session runs until it stops
// or finishes. `stencil_rect` (half-open pixel box) is expanded into a PNG
// stencil; `canvas_rect` + `canvas_color` likewise for set_canvas.
//
// The transcript is every envelope, inbound and outbound, in order, each
// length-prefixed (wire.hpp append_frame).

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pigment/gateway.hpp"
#include "pigment/runtime.hpp"
#include "pigment/wire.hpp"

namespace pigment {

struct ReplayResult {
    std::string transcript;
    std::vector<Envelope> outbound;
    std::vector<std::string> frame_hashes;  // latent_sha256 of every frame, in order
    std::optional<Image> final_image;
    std::string final_status;
    int final_cursor = 0;
};

inline Image rect_raster(std::size_t w, std::size_t h, const json& rect, Color color, std::uint8_t alpha = 255) {
    Image img(w, h);
    const auto x0 = rect.at(0).get<std::size_t>(), y0 = rect.at(1).get<std::size_t>();
    const auto x1 = std::min(rect.at(2).get<std::size_t>(), w), y1 = std::min(rect.at(3).get<std::size_t>(), h);
    for (std::size_t y = y0; y < y1; ++y) {
        for (std::size_t x = x0; x < x1; ++x) {
            auto* p = img.pixel(x, y);
            p[0] = color.r;
            p[1] = color.g;
            p[2] = color.b;
            p[3] = alpha;
        }
    }
    return img;
}

inline ReplayResult run_replay(const json& script, RuntimeOptions options) {
    if (script.contains("backend")) apply_backend_json(options, script.at("backend"));
    const std::size_t size = options.canvas_size();

    ReplayResult result;
    std::string current_session;
    Gateway gateway({[&] { return make_backends(options); }, size, size, false}, [&](const Envelope& e) {
        append_frame(result.transcript, serialize(e));
        if (e.type == "ack" && e.payload.value("of", "") == "open") current_session = e.session_id;
        if (e.type == "frame") result.frame_hashes.push_back(e.payload.at("latent_sha256").get<std::string>());
        result.outbound.push_back(e);
    });

    std::uint64_t seq = 0;
    for (const auto& m : script.at("messages")) {
        Envelope e{m.at("type").get<std::string>(), m.value("session", current_session), ++seq,
                   m.value("payload", json::object())};
        if (m.contains("after_step")) gateway.pump(e.session_id, m.at("after_step").get<int>());
        if (e.payload.contains("stencil_rect")) {
            e.payload["stencil"] = image_to_base64_png(rect_raster(size, size, e.payload.at("stencil_rect"), {255, 255, 255}));
            e.payload.erase("stencil_rect");
        }
        if (e.payload.contains("canvas_rect")) {
            const auto color = e.payload.value("canvas_color", Color{128, 128, 128});
            e.payload["png"] = image_to_base64_png(rect_raster(size, size, e.payload.at("canvas_rect"), color));
            e.payload.erase("canvas_rect");
            e.payload.erase("canvas_color");
        }
        append_frame(result.transcript, serialize(e));
        gateway.handle_message(e);
    }

    if (auto* actor = gateway.actor(current_session)) {
        actor->pump_until(actor->session().total_steps());
        const auto& s = actor->session();
        result.final_status = status_name(s.status());
        result.final_cursor = s.cursor();
        if (s.status() != SessionStatus::idle) result.final_image = s.preview();
    }
    return result;
}

}  // namespace pigment
