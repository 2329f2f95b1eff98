// SPDX-License-Identifier: Apache-2.0
#pragma once

// Client protocol. One Gateway per connection; one SessionActor per session.
//
// Inbound envelopes carry seq 1, 2, 3, ... with no gaps; the first violation
// faults the connection. Outbound envelopes get their own gap-free seq from
// the Outbox, in delivery order.
//
// Client -> server types
//   ping                                       -> pong
//   open         {}                            -> ack {session_id}
//   add_prompt   {id, text, color, center, radius}
//   remove_prompt{id}
//   move_prompt  {id, center}                  (mix / detach gestures)
//   select       {target, point}               -> ack {weights}
//   set_axis     {id, text_a, text_b, color_a, color_b, weight}
//   remove_axis  {id}
//   set_canvas   {png}
//   start        {stencil: png, config}        -> ack, frame*, status
//   intervene    {target?, point?, axes?: {id: weight}}
//   stop | resume | undo | rollback {step}
//   get_state                                  -> state {...}
// Server -> client types
//   pong, ack {ref, of, state_hash, ...}, error {ref, code, message},
//   frame {step, total, preview, latent_sha256}, status {status, cursor}, state
//
// Every state-mutating command is answered with an ack carrying a hash of
// the resulting session state. The gateway only routes: all numeric work
// happens in the palette, session and codec layers.

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stop_token>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pigment/error.hpp"
#include "pigment/image.hpp"
#include "pigment/palette.hpp"
#include "pigment/serialize.hpp"
#include "pigment/session.hpp"
#include "pigment/wire.hpp"

namespace pigment {

class Outbox {
public:
    using Deliver = std::function<void(const Envelope&)>;

    explicit Outbox(Deliver deliver) : deliver_(std::move(deliver)) {}

    void send(Envelope e) {
        std::lock_guard lock(mutex_);
        e.seq = ++seq_;
        deliver_(e);
    }

private:
    Deliver deliver_;
    std::mutex mutex_;
    std::uint64_t seq_ = 0;
};

inline const std::set<std::string>& session_message_types() {
    static const std::set<std::string> types = {
        "add_prompt", "remove_prompt", "move_prompt", "select", "set_axis", "remove_axis", "set_canvas",
        "start",      "intervene",     "stop",        "resume", "rollback", "undo",        "get_state"};
    return types;
}

class SessionActor {
public:
    SessionActor(std::string id, SessionBackends backends, Image canvas, Outbox& outbox, bool threaded)
        : id_(std::move(id)), session_(std::move(backends)), canvas_(std::move(canvas)), outbox_(outbox) {
        if (threaded) {
            worker_ = std::jthread([this](std::stop_token st) { run(st); });
        }
    }

    SessionActor(const SessionActor&) = delete;
    SessionActor& operator=(const SessionActor&) = delete;

    ~SessionActor() {
        if (worker_.joinable()) {
            worker_.request_stop();
            cv_.notify_all();
        }
    }

    const std::string& id() const noexcept { return id_; }

    void post(Envelope e) {
        {
            std::lock_guard lock(mutex_);
            queue_.push_back(std::move(e));
        }
        cv_.notify_all();
    }

    // Manual mode: apply every queued command.
    void drain() {
        std::deque<Envelope> batch;
        {
            std::lock_guard lock(mutex_);
            batch.swap(queue_);
        }
        for (const auto& e : batch) apply(e);
    }

    // Manual mode: run rounds until the cursor reaches `step` or the session
    // leaves the running state. Queued commands are applied between rounds.
    void pump_until(int step) {
        drain();
        while (session_.status() == SessionStatus::running && session_.cursor() < step) {
            run_round();
            drain();
        }
    }

    // Inspection; only safe while no worker is running commands.
    const Session& session() const noexcept { return session_; }
    const PaletteState& palette() const noexcept { return palette_; }

private:
    void run(std::stop_token st) {
        while (!st.stop_requested()) {
            std::deque<Envelope> batch;
            {
                std::unique_lock lock(mutex_);
                cv_.wait(lock, st, [&] { return !queue_.empty() || session_.status() == SessionStatus::running; });
                if (st.stop_requested()) return;
                batch.swap(queue_);
            }
            for (const auto& e : batch) apply(e);
            if (session_.status() == SessionStatus::running) run_round();
        }
    }

    void send(std::string type, json payload) { outbox_.send({std::move(type), id_, 0, std::move(payload)}); }

    void run_round() {
        try {
            session_.run_round([&](const Frame& f) {
                send("frame", {{"step", f.step},
                               {"total", f.total},
                               {"preview", image_to_base64_png(f.preview)},
                               {"latent_sha256", sha256_hex(f.latent)}});
            });
            if (session_.status() == SessionStatus::done) send_status();
        } catch (const Error& e) {
            send("error", {{"ref", nullptr}, {"code", e.code()}, {"message", e.what()}});
            send_status();
        }
    }

    void send_status() {
        send("status", {{"status", status_name(session_.status())}, {"cursor", session_.cursor()}});
    }

    json snapshot() const {
        json j{{"palette", palette_},
               {"selection", selection_ ? json(*selection_) : json(nullptr)},
               {"axes", axes_},
               {"status", status_name(session_.status())},
               {"cursor", session_.cursor()}};
        if (session_.status() != SessionStatus::idle) {
            j["latent_sha256"] = sha256_hex(session_.latent());
            j["steps"] = session_.total_steps();
            json path = json::array();
            for (const auto& p : session_.path().points()) path.push_back(p);
            j["path"] = std::move(path);
            if (auto h = session_.path().highlighted(session_.cursor())) j["highlight"] = *h;
        }
        return j;
    }

    std::string state_hash() const { return sha256_hex(snapshot().dump()).substr(0, 16); }

    void refresh_selection() {
        if (!selection_) return;
        if (palette_.find(selection_->target) || palette_.find_group(selection_->target)) {
            selection_ = select(palette_, selection_->target, selection_->point);
        } else {
            selection_.reset();
        }
    }

    // Palette or slider edits during a generation are prompt interventions.
    void sync_conditioning() {
        const auto st = session_.status();
        if ((st != SessionStatus::running && st != SessionStatus::stopped) || !selection_) return;
        auto mix = mix_from(palette_, *selection_);
        if (mix == session_.mix() && axes_ == session_.axes()) return;
        session_.intervene(std::move(mix), axes_);
    }

    AxisSetting& axis(const std::string& id) {
        for (auto& a : axes_)
            if (a.id == id) return a;
        throw ContractError("unknown_axis", "no directional axis '" + id + "'");
    }

    void apply(const Envelope& e) {
        const json& p = e.payload;
        json extra = json::object();
        try {
            if (e.type == "get_state") {
                send("state", {{"ref", e.seq}, {"state", snapshot()}, {"state_hash", state_hash()}});
                return;
            }
            if (e.type == "add_prompt") {
                palette_.add_node(p.get<PromptNode>());
            } else if (e.type == "remove_prompt") {
                palette_.remove_node(p.at("id").get<std::string>());
                refresh_selection();
                sync_conditioning();
            } else if (e.type == "move_prompt") {
                palette_ = contact(palette_, p.at("id").get<std::string>(), p.at("center").get<Vec2>());
                refresh_selection();
                sync_conditioning();
                extra["palette"] = palette_;
            } else if (e.type == "select") {
                selection_ = select(palette_, p.at("target").get<std::string>(), p.value("point", Vec2{}));
                sync_conditioning();
                extra["weights"] = selection_->weights;
            } else if (e.type == "set_axis") {
                auto a = p.get<AxisSetting>();
                auto it = std::find_if(axes_.begin(), axes_.end(), [&](const auto& x) { return x.id == a.id; });
                if (it == axes_.end()) axes_.push_back(std::move(a)); else *it = std::move(a);
                sync_conditioning();
            } else if (e.type == "remove_axis") {
                const auto id = p.at("id").get<std::string>();
                axis(id);
                std::erase_if(axes_, [&](const auto& x) { return x.id == id; });
                sync_conditioning();
            } else if (e.type == "set_canvas") {
                if (session_.status() == SessionStatus::running) throw StateError("set_canvas: stop the generation first");
                auto img = image_from_base64_png(p.at("png").get<std::string>());
                if (img.width != canvas_.width || img.height != canvas_.height) {
                    throw ContractError("resolution_mismatch", "canvas must stay " + std::to_string(canvas_.width) + "x" +
                                                                   std::to_string(canvas_.height));
                }
                canvas_ = std::move(img);
            } else if (e.type == "start") {
                if (!selection_) throw ContractError("no_selection", "select a prompt before starting");
                const auto stencil = alpha_mask(image_from_base64_png(p.at("stencil").get<std::string>()));
                const auto config = p.value("config", json::object()).get<GenerationConfig>();
                session_.start(canvas_, stencil, mix_from(palette_, *selection_), axes_, config);
            } else if (e.type == "intervene") {
                if (p.contains("target")) selection_ = select(palette_, p.at("target").get<std::string>(), p.value("point", Vec2{}));
                if (p.contains("axes")) {
                    for (const auto& [id, w] : p.at("axes").items()) axis(id).weight = w.get<double>();
                }
                const auto st = session_.status();
                if (st != SessionStatus::running && st != SessionStatus::stopped) {
                    throw StateError(std::string("intervene: session is ") + status_name(st));
                }
                sync_conditioning();
            } else if (e.type == "stop") {
                session_.stop();
            } else if (e.type == "resume") {
                session_.resume();
            } else if (e.type == "rollback") {
                if (!p.contains("step") || !p.at("step").is_number_integer()) {
                    throw ContractError("bad_step", "rollback needs an integer step");
                }
                session_.rollback(p.at("step").get<int>());
            } else if (e.type == "undo") {
                session_.undo();
            } else {
                throw ContractError("unknown_type", "unhandled session message '" + e.type + "'");
            }
        } catch (const Error& ex) {
            send("error", {{"ref", e.seq}, {"code", ex.code()}, {"message", ex.what()}});
            return;
        } catch (const json::exception& ex) {
            send("error", {{"ref", e.seq}, {"code", "malformed"}, {"message", ex.what()}});
            return;
        }
        extra["ref"] = e.seq;
        extra["of"] = e.type;
        extra["state_hash"] = state_hash();
        extra["status"] = status_name(session_.status());
        extra["cursor"] = session_.cursor();
        send("ack", std::move(extra));
    }

    std::string id_;
    Session session_;
    Image canvas_;
    PaletteState palette_;
    std::optional<Selection> selection_;
    std::vector<AxisSetting> axes_;
    Outbox& outbox_;

    std::mutex mutex_;
    std::condition_variable_any cv_;
    std::deque<Envelope> queue_;
    std::jthread worker_;
};

struct GatewayOptions {
    std::function<SessionBackends()> make_backends;
    std::size_t canvas_width = 64;
    std::size_t canvas_height = 64;
    bool threaded = false;
};

class Gateway {
public:
    Gateway(GatewayOptions options, Outbox::Deliver deliver)
        : options_(std::move(options)), outbox_(std::move(deliver)) {}

    ~Gateway() { sessions_.clear(); }

    // Raw bytes from the transport. Unparseable input gets an error reply.
    void handle_raw(std::string_view text) {
        Envelope e;
        try {
            e = parse_envelope(text);
        } catch (const Error& ex) {
            reply_error("", nullptr, ex.code(), ex.what());
            return;
        }
        handle_message(e);
    }

    void handle_message(const Envelope& e) {
        if (faulted_) return;
        if (e.seq != expected_seq_) {
            faulted_ = true;
            reply_error(e.session_id, e.seq, "ordering_fault",
                        "expected seq " + std::to_string(expected_seq_) + ", got " + std::to_string(e.seq));
            return;
        }
        ++expected_seq_;

        if (e.type == "ping") {
            outbox_.send({"pong", e.session_id, 0, {{"ref", e.seq}}});
            return;
        }
        if (e.type == "open") {
            SessionBackends backends;
            try {
                backends = options_.make_backends();
            } catch (const Error& ex) {
                reply_error(e.session_id, e.seq, ex.code(), ex.what());
                return;
            }
            const std::string id = "s" + std::to_string(++session_counter_);
            auto actor = std::make_unique<SessionActor>(id, std::move(backends),
                                                        Image(options_.canvas_width, options_.canvas_height), outbox_,
                                                        options_.threaded);
            sessions_.emplace(id, std::move(actor));
            outbox_.send({"ack", id, 0, {{"ref", e.seq}, {"of", "open"}, {"session_id", id}}});
            return;
        }
        if (!session_message_types().contains(e.type)) {
            reply_error(e.session_id, e.seq, "unknown_type", "unknown message type '" + e.type + "'");
            return;
        }
        auto* a = actor(e.session_id);
        if (!a) {
            reply_error(e.session_id, e.seq, "no_session", "no session '" + e.session_id + "'");
            return;
        }
        a->post(e);
        if (!options_.threaded) a->drain();
    }

    bool faulted() const noexcept { return faulted_; }

    SessionActor* actor(const std::string& id) {
        auto it = sessions_.find(id);
        return it == sessions_.end() ? nullptr : it->second.get();
    }

    // Manual mode only.
    void pump(const std::string& session_id, int until_step) {
        if (auto* a = actor(session_id)) a->pump_until(until_step);
    }

private:
    void reply_error(const std::string& session_id, json ref, const std::string& code, const std::string& message) {
        outbox_.send({"error", session_id, 0, {{"ref", std::move(ref)}, {"code", code}, {"message", message}}});
    }

    GatewayOptions options_;
    Outbox outbox_;
    std::map<std::string, std::unique_ptr<SessionActor>> sessions_;
    std::uint64_t expected_seq_ = 1;
    std::uint64_t session_counter_ = 0;
    bool faulted_ = false;
};

}  // namespace pigment
