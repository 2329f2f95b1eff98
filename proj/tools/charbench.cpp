// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "options.hpp"
#include "pigment/charbench.hpp"
#include "pigment/runtime.hpp"

int main(int argc, char** argv) {
    using namespace pigment;
    CLI::App app{"charbench: editing-condition characterisation sweeps"};
    app.require_subcommand(1);

    cli::BackendFlags flags;
    std::string spec_path;
    std::string out = "charbench-out";
    auto* run = app.add_subcommand("run", "run a sweep and write records.csv plus image pairs");
    run->add_option("--spec", spec_path, "sweep spec JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out, "output directory")->envname("PIGMENT_OUT");
    flags.add_to(*run);

    CLI11_PARSE(app, argc, argv);
    try {
        std::ifstream in(spec_path);
        const auto j = json::parse(in);
        const auto options = flags.merged(*run, j.contains("backend") ? &j.at("backend") : nullptr);

        charbench::Runner runner(charbench::parse_spec(j), [&] { return make_backends(options); }, options.canvas_size());
        const auto result = runner.run();
        charbench::write_outputs(out, result);
        for (const auto& f : result.failures) std::cerr << "record " << f.record_id << " failed: " << f.message << "\n";
        std::cout << result.records.size() << " records, " << result.failures.size() << " failed, written to " << out << "\n";
        return result.records.empty() && !result.failures.empty() ? 1 : 0;
    } catch (const pigment::Error& e) {
        std::cerr << "charbench: " << e.code() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "charbench: " << e.what() << "\n";
        return 1;
    }
}
