// SPDX-License-Identifier: Apache-2.0
#pragma once

// Backend assembly shared by the CLI tools.

#include <chrono>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "pigment/backend.hpp"
#include "pigment/error.hpp"
#include "pigment/latentops.hpp"
#include "pigment/net.hpp"
#include "pigment/remote.hpp"
#include "pigment/session.hpp"
#include "pigment/vecmix.hpp"

namespace pigment {

inline constexpr std::size_t kLatentChannels = 3;
inline constexpr std::size_t kCodecFactor = 8;

struct RuntimeOptions {
    std::string backend = "toy";  // toy | remote
    std::string backend_url;      // ws://host:port/path
    double gamma = 0.3;
    std::size_t latent_size = 8;  // latent is latent_size x latent_size; canvas 8x that
    std::chrono::milliseconds timeout{30000};

    std::size_t canvas_size() const { return latent_size * kCodecFactor; }
    Shape latent_shape() const { return {kLatentChannels, latent_size, latent_size}; }
};

inline SessionBackends make_backends(const RuntimeOptions& o) {
    if (o.latent_size == 0) throw ContractError("bad_config", "latent size must be positive");
    auto codec = std::make_shared<ToyCodec>(kCodecFactor);
    if (o.backend == "toy") {
        auto embedder = std::make_shared<ToyEmbedder>();
        auto denoiser = std::make_shared<ToyDenoiser>(ToyDenoiserConfig{o.gamma, "toy"}, o.latent_shape(), embedder->shape());
        return {embedder, denoiser, codec};
    }
    if (o.backend == "remote") {
        if (o.backend_url.empty()) throw ContractError("bad_config", "remote backend needs --backend-url");
        auto client = std::make_shared<BackendClient>(std::make_shared<WebSocketTransport>(o.backend_url), o.timeout);
        return {std::make_shared<RemoteEmbedder>(client), std::make_shared<RemoteDenoiser>(client, o.latent_shape()), codec};
    }
    throw ContractError("bad_config", "unknown backend '" + o.backend + "' (toy | remote)");
}

// Script/spec files may carry a "backend" object with the same fields.
inline void apply_backend_json(RuntimeOptions& o, const nlohmann::json& j) {
    o.backend = j.value("kind", o.backend);
    o.backend_url = j.value("url", o.backend_url);
    o.gamma = j.value("gamma", o.gamma);
    o.latent_size = j.value("latent_size", o.latent_size);
}

}  // namespace pigment
