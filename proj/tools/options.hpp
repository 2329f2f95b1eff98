// SPDX-License-Identifier: Apache-2.0
#pragma once

// Backend flags shared by the command-line tools. Every flag can also be set
// through the PIGMENT_* environment variable named next to it.

#include <CLI11.hpp>

#include "pigment/runtime.hpp"

namespace pigment::cli {

struct BackendFlags {
    RuntimeOptions options;
    long timeout_ms = 30000;

    void add_to(CLI::App& app) {
        app.add_option("--backend", options.backend, "toy | remote")
            ->envname("PIGMENT_BACKEND")
            ->check(CLI::IsMember({"toy", "remote"}));
        app.add_option("--backend-url", options.backend_url, "ws://host:port/path of a remote model server")
            ->envname("PIGMENT_BACKEND_URL");
        app.add_option("--gamma", options.gamma, "toy denoiser relaxation rate in (0, 1]")
            ->envname("PIGMENT_GAMMA")
            ->check(CLI::Range(0.0, 1.0));
        app.add_option("--latent-size", options.latent_size, "latent side length; canvas is 8x")
            ->envname("PIGMENT_LATENT_SIZE")
            ->check(CLI::PositiveNumber);
        app.add_option("--timeout-ms", timeout_ms, "remote backend call timeout")->envname("PIGMENT_TIMEOUT_MS");
    }

    RuntimeOptions resolved() const {
        auto o = options;
        o.timeout = std::chrono::milliseconds(timeout_ms);
        return o;
    }

    // A backend block from a script or spec file, overridden by any flag the
    // user actually passed on `cmd`.
    RuntimeOptions merged(const CLI::App& cmd, const json* file_backend) const {
        auto o = resolved();
        if (!file_backend) return o;
        apply_backend_json(o, *file_backend);
        if (cmd.count("--backend")) o.backend = options.backend;
        if (cmd.count("--backend-url")) o.backend_url = options.backend_url;
        if (cmd.count("--gamma")) o.gamma = options.gamma;
        if (cmd.count("--latent-size")) o.latent_size = options.latent_size;
        return o;
    }
};

}  // namespace pigment::cli
