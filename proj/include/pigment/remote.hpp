// SPDX-License-Identifier: Apache-2.0
#pragma once

// Remote backend protocol.
//
//   embed_req   {text}                          -> embed_rsp   {embedding, embedder_id}
//   denoise_req {latent, timestep, guidance}    -> denoise_rsp {eps}
//
// Either side may answer with error {code, message}.

#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "pigment/backend.hpp"
#include "pigment/transport.hpp"
#include "pigment/vecmix.hpp"
#include "pigment/wire.hpp"

namespace pigment {

template <typename T>
Tensor<T> tensor_field(const json& payload, const char* key) {
    if (!payload.contains(key)) throw TransportError("malformed", std::string("reply lacks '") + key + "'");
    try {
        return tensor_from_json<T>(payload.at(key));
    } catch (const ContractError& e) {
        throw TransportError("malformed", e.what());
    }
}

class RemoteEmbedder final : public Embedder {
public:
    // Without a declared shape the embedder adopts the shape of the backend's
    // empty-prompt embedding.
    explicit RemoteEmbedder(std::shared_ptr<BackendClient> client, std::optional<Shape> declared = std::nullopt)
        : client_(std::move(client)) {
        if (declared) {
            shape_ = *declared;
        } else {
            auto probe = fetch("");
            shape_ = probe.data.shape();
            id_ = probe.embedder_id;
        }
    }

    std::string id() const override { return id_; }
    Shape shape() const override { return shape_; }

    PromptEmbedding embed(std::string_view text) const override {
        auto e = fetch(text);
        check_embedding(*this, e);
        return e;
    }

private:
    PromptEmbedding fetch(std::string_view text) const {
        const json rsp = client_->call("embed_req", {{"text", std::string(text)}}, "embed_rsp");
        return {tensor_field<double>(rsp, "embedding"), std::string(text), rsp.value("embedder_id", std::string("remote"))};
    }

    std::shared_ptr<BackendClient> client_;
    Shape shape_;
    std::string id_ = "remote";
};

class RemoteDenoiser final : public Denoiser {
public:
    RemoteDenoiser(std::shared_ptr<BackendClient> client, Shape latent_shape, std::string id = "remote")
        : client_(std::move(client)), latent_shape_(std::move(latent_shape)), id_(std::move(id)) {}

    std::string id() const override { return id_; }
    Shape latent_shape() const override { return latent_shape_; }

    LatentTensor predict(const LatentTensor& latent, int timestep, const GuidanceVector& guidance) const override {
        const json rsp = client_->call(
            "denoise_req",
            {{"latent", tensor_to_json(latent)}, {"timestep", timestep}, {"guidance", tensor_to_json(guidance.data)}},
            "denoise_rsp");
        auto eps = tensor_field<float>(rsp, "eps");
        check_prediction(*this, latent, eps);
        return eps;
    }

private:
    std::shared_ptr<BackendClient> client_;
    Shape latent_shape_;
    std::string id_;
};

// Server side of the protocol, over any local embedder/denoiser pair.
class BackendService {
public:
    BackendService(std::shared_ptr<const Embedder> embedder, std::shared_ptr<const Denoiser> denoiser)
        : embedder_(std::move(embedder)), denoiser_(std::move(denoiser)) {}

    std::string handle(const std::string& raw) {
        Envelope reply;
        try {
            const Envelope req = parse_envelope(raw);
            reply = dispatch(req);
        } catch (const Error& e) {
            reply = {"error", "", 0, {{"code", e.code()}, {"message", e.what()}}};
        } catch (const json::exception& e) {
            reply = {"error", "", 0, {{"code", "malformed"}, {"message", e.what()}}};
        } catch (const std::exception& e) {
            reply = {"error", "", 0, {{"code", "internal"}, {"message", e.what()}}};
        }
        reply.seq = ++seq_;
        return serialize(reply);
    }

private:
    Envelope dispatch(const Envelope& req) {
        if (req.type == "embed_req") {
            const auto e = embedder_->embed(req.payload.at("text").get<std::string>());
            return {"embed_rsp", "", 0, {{"embedding", tensor_to_json(e.data)}, {"embedder_id", e.embedder_id}, {"ref", req.seq}}};
        }
        if (req.type == "denoise_req") {
            const auto latent = tensor_from_json<float>(req.payload.at("latent"));
            GuidanceVector g{tensor_from_json<double>(req.payload.at("guidance")), {}, {}};
            const int t = req.payload.at("timestep").get<int>();
            const auto eps = denoiser_->predict(latent, t, g);
            return {"denoise_rsp", "", 0, {{"eps", tensor_to_json(eps)}, {"ref", req.seq}}};
        }
        throw ContractError("unknown_type", "backend does not handle '" + req.type + "'");
    }

    std::shared_ptr<const Embedder> embedder_;
    std::shared_ptr<const Denoiser> denoiser_;
    std::uint64_t seq_ = 0;
};

}  // namespace pigment
