// SPDX-License-Identifier: Apache-2.0
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "options.hpp"
#include "pigment/charbench.hpp"
#include "pigment/gateway.hpp"
#include "pigment/net.hpp"
#include "pigment/project.hpp"
#include "pigment/remote.hpp"
#include "pigment/replay.hpp"
#include "pigment/runtime.hpp"

namespace {

using namespace pigment;

class GatewayHandler final : public ConnectionHandler {
public:
    GatewayHandler(const RuntimeOptions& options, Sender send)
        : gateway_({[options] { return make_backends(options); }, options.canvas_size(), options.canvas_size(), true},
                   [send](const Envelope& e) { send(serialize(e)); }) {}

    void on_message(const std::string& text) override { gateway_.handle_raw(text); }

private:
    Gateway gateway_;
};

class BackendHandler final : public ConnectionHandler {
public:
    BackendHandler(std::shared_ptr<BackendService> service, Sender send) : service_(std::move(service)), send_(std::move(send)) {}

    void on_message(const std::string& text) override { send_(service_->handle(text)); }

private:
    std::shared_ptr<BackendService> service_;
    Sender send_;
};

int serve(const std::string& listen, const std::string& role, const RuntimeOptions& options) {
    const auto [host, port] = parse_listen(listen);
    HandlerFactory factory;
    if (role == "backend") {
        // Model server for `--backend remote` clients, backed by the toy models.
        auto local = make_backends({"toy", "", options.gamma, options.latent_size, options.timeout});
        factory = [local](Sender send) -> std::unique_ptr<ConnectionHandler> {
            return std::make_unique<BackendHandler>(std::make_shared<BackendService>(local.embedder, local.denoiser),
                                                    std::move(send));
        };
    } else {
        make_backends(options);  // fail fast on bad configuration
        factory = [options](Sender send) -> std::unique_ptr<ConnectionHandler> {
            return std::make_unique<GatewayHandler>(options, std::move(send));
        };
    }
    WebSocketServer server(host, port, std::move(factory));
    std::cerr << "pigment: " << role << " listening on ws://" << host << ":" << server.port() << "/\n";
    server.run();
    return 0;
}

std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("io", "cannot open " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int replay(const std::filesystem::path& script_path, const std::filesystem::path& out, const CLI::App& cmd,
           const cli::BackendFlags& flags) {
    auto script = json::parse(read_text(script_path));
    const auto options = flags.merged(cmd, script.contains("backend") ? &script.at("backend") : nullptr);
    script.erase("backend");
    const auto result = run_replay(script, options);
    std::filesystem::create_directories(out);
    charbench::write_file(out / "transcript.bin",
                          std::span(reinterpret_cast<const std::uint8_t*>(result.transcript.data()), result.transcript.size()));
    if (result.final_image) charbench::write_file(out / "final.png", encode_png(*result.final_image));
    for (const auto& e : result.outbound) {
        if (e.type == "error") std::cerr << "error reply: " << e.payload.dump() << "\n";
    }
    std::cout << "status " << (result.final_status.empty() ? "none" : result.final_status) << " cursor "
              << result.final_cursor << " frames " << result.frame_hashes.size() << " transcript "
              << sha256_hex(result.transcript) << "\n";
    return 0;
}

int inspect(const std::filesystem::path& file) {
    const auto p = ProjectStore::load_file(file);
    json layers = json::array();
    for (const auto& l : p.layers) {
        layers.push_back({{"id", l.id}, {"name", l.name}, {"visible", l.visible}, {"filled_pixels", alpha_mask(l.raster).count()}});
    }
    const json summary{{"schema_version", kProjectSchemaVersion},
                       {"id", p.id},
                       {"name", p.name},
                       {"size", {p.width, p.height}},
                       {"layers", layers},
                       {"prompts", p.prompts},
                       {"palette", p.palette},
                       {"axes", p.axes},
                       {"config", p.config}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pigment: interactive prompt-mixing diffusion server"};
    app.require_subcommand(1);

    pigment::cli::BackendFlags flags;
    std::string listen = "127.0.0.1:8765";
    std::string role = "session";
    auto* serve_cmd = app.add_subcommand("serve", "run the websocket session server");
    serve_cmd->add_option("--listen", listen, "host:port")->envname("PIGMENT_LISTEN");
    serve_cmd->add_option("--role", role, "session (client protocol) | backend (model server)")
        ->envname("PIGMENT_ROLE")
        ->check(CLI::IsMember({"session", "backend"}));
    flags.add_to(*serve_cmd);

    std::string script;
    std::string out = "replay-out";
    auto* replay_cmd = app.add_subcommand("replay", "replay a scripted session headlessly");
    replay_cmd->add_option("script", script, "script JSON")->required()->check(CLI::ExistingFile);
    replay_cmd->add_option("--out", out, "output directory")->envname("PIGMENT_OUT");
    flags.add_to(*replay_cmd);

    std::string project;
    auto* inspect_cmd = app.add_subcommand("inspect", "summarise a project file");
    inspect_cmd->add_option("project", project, "project archive")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*serve_cmd) return serve(listen, role, flags.resolved());
        if (*replay_cmd) return replay(script, out, *replay_cmd, flags);
        if (*inspect_cmd) return inspect(project);
    } catch (const pigment::Error& e) {
        std::cerr << "pigment: " << e.code() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "pigment: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
