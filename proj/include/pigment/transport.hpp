// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <functional>
#include <mutex>
#include <string>
#include <utility>

#include "pigment/error.hpp"
#include "pigment/wire.hpp"

namespace pigment {

using namespace std::chrono_literals;

// Request/response channel to a remote model server.
class Transport {
public:
    virtual ~Transport() = default;

    // Send one serialised envelope, wait for one serialised reply.
    // Throws TransportError on timeout or disconnect.
    virtual std::string round_trip(const std::string& request, std::chrono::milliseconds timeout) = 0;
};

// In-process transport. Bytes still go through the wire format so that a
// stub behind it sees exactly what a network peer would.
class LoopbackTransport final : public Transport {
public:
    using Handler = std::function<std::string(const std::string&)>;

    explicit LoopbackTransport(Handler handler) : handler_(std::move(handler)) {}

    std::string round_trip(const std::string& request, std::chrono::milliseconds) override {
        return handler_(request);
    }

private:
    Handler handler_;
};

// Envelope-level client: stamps outbound seq, checks reply types, turns
// backend error envelopes into TransportError. One request in flight at a time.
class BackendClient {
public:
    explicit BackendClient(std::shared_ptr<Transport> transport, std::chrono::milliseconds timeout = 30s)
        : transport_(std::move(transport)), timeout_(timeout) {}

    json call(const std::string& type, json payload, const std::string& expect) {
        std::lock_guard lock(mutex_);
        const Envelope req{type, "", ++seq_, std::move(payload)};
        const std::string raw = transport_->round_trip(serialize(req), timeout_);
        Envelope rsp;
        try {
            rsp = parse_envelope(raw);
        } catch (const ContractError& e) {
            throw TransportError("malformed", std::string("backend reply: ") + e.what());
        }
        if (rsp.type == "error") {
            throw TransportError("backend_error", "backend refused " + type + ": " +
                                                      rsp.payload.value("message", std::string("unknown")));
        }
        if (rsp.type != expect) {
            throw TransportError("malformed", "expected " + expect + ", backend sent " + rsp.type);
        }
        return std::move(rsp.payload);
    }

    std::chrono::milliseconds timeout() const noexcept { return timeout_; }

private:
    std::shared_ptr<Transport> transport_;
    std::chrono::milliseconds timeout_;
    std::mutex mutex_;
    std::uint64_t seq_ = 0;
};

}  // namespace pigment
