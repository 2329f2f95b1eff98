// SPDX-License-Identifier: Apache-2.0
#pragma once

// End-to-end checks shared by the acceptance runner and the unit tests.
// Each returns a Verdict instead of asserting so the runner can report
// every criterion on one line.

#include <bit>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pigment/backend.hpp"
#include "pigment/charbench.hpp"
#include "pigment/latentops.hpp"
#include "pigment/replay.hpp"
#include "pigment/scheduler.hpp"
#include "pigment/session.hpp"
#include "pigment/vecmix.hpp"

namespace scenario {

using namespace pigment;

struct Verdict {
    bool pass = true;
    std::string detail;

    void fail(const std::string& why) {
        if (pass) detail = why;
        pass = false;
    }
};

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

// ---------------------------------------------------------------------------
// Fixtures

inline SessionBackends toy_backends(double gamma, std::size_t latent_size = 8) {
    auto embedder = std::make_shared<ToyEmbedder>();
    auto denoiser = std::make_shared<ToyDenoiser>(ToyDenoiserConfig{gamma, "toy"}, Shape{3, latent_size, latent_size},
                                                  embedder->shape());
    return {embedder, denoiser, std::make_shared<ToyCodec>(8)};
}

inline Image painted(std::size_t size, std::size_t x0, std::size_t y0, std::size_t x1, std::size_t y1, Color c) {
    Image img(size, size);
    for (std::size_t y = y0; y < y1; ++y) {
        for (std::size_t x = x0; x < x1; ++x) {
            auto* p = img.pixel(x, y);
            p[0] = c.r;
            p[1] = c.g;
            p[2] = c.b;
            p[3] = 255;
        }
    }
    return img;
}

inline Bitmap box(std::size_t size, std::size_t x0, std::size_t y0, std::size_t x1, std::size_t y1) {
    Bitmap b(size, size);
    for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x) b.set(x, y);
    return b;
}

inline GenerationConfig config(int steps, double guide = 7.5, double overcoat = 0.0, std::uint64_t seed = 3) {
    GenerationConfig c;
    c.steps = steps;
    c.guide_scale = guide;
    c.overcoat = overcoat;
    c.init_seed = seed;
    c.overcoat_seed = seed + 1000;
    return c;
}

// ---------------------------------------------------------------------------
// Prompt arithmetic properties

inline PromptEmbedding random_embedding(oracle::Gen& g, std::size_t s, std::size_t d) {
    Tensor<double> t({s, d});
    for (auto& v : t.values()) v = g.normal();
    return {std::move(t), "r", "test"};
}

inline Verdict vecmix_properties(int cases, std::uint64_t seed) {
    Verdict v;
    oracle::Gen g(seed);
    double worst = 0.0;
    auto check = [&](double err, const char* what) {
        worst = std::max(worst, err);
        if (!(err <= 1e-12)) v.fail(std::string(what) + " error " + fmt(err));
    };
    for (int c = 0; c < cases && v.pass; ++c) {
        const std::size_t s = g.index(1, 4), d = g.index(1, 128), n = g.index(1, 3);
        std::vector<PromptEmbedding> es;
        for (std::size_t i = 0; i < n; ++i) es.push_back(random_embedding(g, s, d));
        const auto w = g.simplex(n);
        const MixWeights mw(w);
        const auto mixed = interpolate(es, mw);

        // Linearity against a long double weighted sum.
        double err = 0;
        for (std::size_t j = 0; j < s * d; ++j) {
            long double ref = 0;
            for (std::size_t i = 0; i < n; ++i) ref += static_cast<long double>(w[i]) * es[i].data[j];
            err = std::max(err, static_cast<double>(std::fabs(ref - mixed.data[j])));
        }
        check(err, "interpolate linearity");

        // Permutation invariance: reversed order, reversed weights.
        std::vector<PromptEmbedding> rev(es.rbegin(), es.rend());
        const auto mixed_rev = interpolate(rev, MixWeights(std::vector<double>(w.rbegin(), w.rend())));
        check(max_abs_diff(mixed.data, mixed_rev.data), "permutation invariance");

        // Identity weight: all mass on one prompt reproduces it exactly.
        const std::size_t hot = g.index(0, n - 1);
        std::vector<double> one(n, 0.0);
        one[hot] = 1.0;
        if (!(interpolate(es, MixWeights(one)).data == es[hot].data)) v.fail("identity weight not exact");

        // Directional composition against a long double oracle.
        const std::size_t n_axes = g.index(0, 2);
        std::vector<DirectionalAxis> axes;
        for (std::size_t a = 0; a < n_axes; ++a) {
            axes.push_back({"a" + std::to_string(a), random_embedding(g, s, d), random_embedding(g, s, d), g.uniform(-1, 1)});
        }
        const auto composed = compose(mixed, axes, mw);
        err = 0;
        for (std::size_t j = 0; j < s * d; ++j) {
            long double ref = mixed.data[j];
            for (const auto& a : axes) ref += static_cast<long double>(a.weight) * (a.end_a.data[j] - a.end_b.data[j]);
            err = std::max(err, static_cast<double>(std::fabs(ref - composed.data[j])));
        }
        check(err, "compose linearity");

        // Full-difference endpoint: weight 1 moves base by exactly end_a - end_b.
        DirectionalAxis full{"full", random_embedding(g, s, d), random_embedding(g, s, d), 1.0};
        const auto shifted = compose(mixed, std::span(&full, 1), mw);
        err = 0;
        for (std::size_t j = 0; j < s * d; ++j) {
            const long double ref = static_cast<long double>(mixed.data[j]) + full.end_a.data[j] - full.end_b.data[j];
            err = std::max(err, static_cast<double>(std::fabs(ref - shifted.data[j])));
        }
        check(err, "full-difference endpoint");

        // Swapped ends negate the direction exactly.
        DirectionalAxis swapped{"s", full.end_b, full.end_a, 1.0};
        const auto fwd = direction(full), back = direction(swapped);
        for (std::size_t j = 0; j < fwd.size(); ++j)
            if (fwd[j] != -back[j]) v.fail("direction antisymmetry");

        if (!(compose(mixed, {}, mw).data == mixed.data)) v.fail("empty axis set changes the base");
    }
    if (v.pass) v.detail = std::to_string(cases) + " cases, worst error " + fmt(worst);
    return v;
}

// ---------------------------------------------------------------------------
// Scheduler

// Plain DDIM loop with the toy denoiser, no masking or guidance.
inline LatentTensor ddim_loop(const ToyDenoiser& d, const GuidanceVector& g, int steps, std::uint64_t seed) {
    const auto schedule = build_schedule(steps);
    auto latent = initial_latent(d.latent_shape(), seed);
    for (int k = 0; k < steps; ++k) {
        const auto eps = d.predict(latent, schedule.timestep(k), g);
        latent = ddim_step(latent, eps, k, schedule);
    }
    return latent;
}

inline Verdict scheduler_convergence() {
    Verdict v;
    ToyEmbedder embedder;
    ToyDenoiser denoiser({1.0, "toy"}, {3, 8, 8}, embedder.shape());
    const auto g = compose(embedder.embed("a river, impressionism"), {});
    const auto target = denoiser.target(g);
    double worst = 0;
    for (int steps : {5, 50}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto final_latent = ddim_loop(denoiser, g, steps, seed);
            double err = 0;
            for (std::size_t i = 0; i < target.size(); ++i)
                err = std::max(err, std::fabs(static_cast<double>(final_latent[i]) - target[i]));
            worst = std::max(worst, err);
            if (!(err <= 1e-4)) v.fail("K=" + std::to_string(steps) + " seed " + std::to_string(seed) + " error " + fmt(err));
        }
    }

    // Monte-Carlo variance of add_noise on a zero latent.
    const auto schedule = build_schedule(50);
    double worst_rel = 0;
    for (int k : {0, 10, 25, 40, 49}) {
        Tensor<double> zero({10000});
        NormalStream rng(99, stream_id(StreamDomain::overcoat, static_cast<std::uint32_t>(k)));
        const auto noised = add_noise(zero, k, schedule, rng);
        double sum = 0, sq = 0;
        for (double x : noised.values()) {
            sum += x;
            sq += x * x;
        }
        const double n = static_cast<double>(noised.size());
        const double var = (sq - sum * sum / n) / (n - 1);
        const auto ab = oracle::alpha_bar()[static_cast<std::size_t>(schedule.timestep(k))];
        const double expected = static_cast<double>(1.0L - ab);
        const double rel = std::fabs(var / expected - 1.0);
        worst_rel = std::max(worst_rel, rel);
        if (!(rel <= 0.05)) v.fail("add_noise variance at k=" + std::to_string(k) + " off by " + fmt(100 * rel) + "%");
    }
    if (v.pass) v.detail = "max |x_K - x*| " + fmt(worst) + ", variance within " + fmt(100 * worst_rel) + "%";
    return v;
}

// ---------------------------------------------------------------------------
// Masking

inline Verdict masking_exactness() {
    Verdict v;
    const std::size_t size = 64;  // 8x8 latent
    const ToyCodec codec;
    // Left half painted; stencil straddles the boundary.
    const Image canvas = painted(size, 0, 0, 32, 64, {200, 40, 90});
    const auto stencil = StencilMask::from_bitmap(box(size, 16, 8, 48, 56), 8);
    const auto regions = classify_regions(downsample_any(alpha_mask(canvas), 8), stencil.latent_mask);
    for (auto r : {Region::A1, Region::A2, Region::B, Region::C})
        if (regions.count(r) == 0) v.fail(std::string("fixture lacks region ") + region_name(r));
    const auto canvas_latent = encode_canvas(codec, canvas);
    const int steps = 50;
    const auto schedule = build_schedule(steps);
    const auto ab = oracle::alpha_bar();
    oracle::Gen g(5);

    for (int o : {0, 25, 50, 75, 100}) {
        const OvercoatConfig overcoat{static_cast<double>(o), 77};
        int pinned_steps = 0;
        for (int k = 0; k < steps; ++k) {
            LatentTensor latent(canvas_latent.shape());
            for (auto& x : latent.values()) x = static_cast<float>(g.normal());
            const RngCheckpoint cp{77, stream_id(StreamDomain::overcoat, static_cast<std::uint32_t>(k)), 0};
            auto rng = NormalStream::restore(cp);
            const auto out = mask_step(latent, canvas_latent, regions, k, overcoat, schedule, rng);
            auto rng_ref = NormalStream::restore(cp);
            const auto nu = add_noise(canvas_latent, k, schedule, rng_ref);

            // nu itself against the closed form with oracle draws.
            const long double a = ab[static_cast<std::size_t>(schedule.timestep(k))];
            for (std::size_t i = 0; i < nu.size(); ++i) {
                const long double ref = std::sqrt(a) * canvas_latent[i] + std::sqrt(1 - a) * oracle::normal(77, cp.stream, i);
                if (std::fabs(static_cast<double>(ref) - nu[i]) > 1e-5) v.fail("nu deviates from closed form");
            }

            const bool expect_pin = 100 * k < (100 - o) * steps;  // k < (1 - o/100) K
            bool a2_pinned = true, a2_free = true;
            const std::size_t plane = regions.labels.size();
            for (std::size_t c = 0; c < 3; ++c) {
                for (std::size_t cell = 0; cell < plane; ++cell) {
                    const std::size_t i = c * plane + cell;
                    const auto bits = std::bit_cast<std::uint32_t>(out[i]);
                    const bool is_nu = bits == std::bit_cast<std::uint32_t>(nu[i]);
                    const bool is_in = bits == std::bit_cast<std::uint32_t>(latent[i]);
                    switch (regions.labels[cell]) {
                        case Region::B:
                        case Region::C:
                            if (!is_nu) v.fail("B/C cell not bitwise nu at o=" + std::to_string(o) + " k=" + std::to_string(k));
                            break;
                        case Region::A1:
                            if (!is_in) v.fail("A1 cell modified");
                            break;
                        case Region::A2:
                            a2_pinned = a2_pinned && is_nu;
                            a2_free = a2_free && is_in;
                            break;
                    }
                }
            }
            if (expect_pin && !a2_pinned) v.fail("A2 not pinned at o=" + std::to_string(o) + " k=" + std::to_string(k));
            if (!expect_pin && !a2_free) v.fail("A2 pinned at o=" + std::to_string(o) + " k=" + std::to_string(k));
            pinned_steps += expect_pin;
        }
        const int expected = o == 0 ? 50 : o == 25 ? 38 : o == 50 ? 25 : o == 75 ? 13 : 0;
        if (pinned_steps != expected) v.fail("pinned step count " + std::to_string(pinned_steps) + " at o=" + std::to_string(o));
    }

    // Composite after a real run leaves unstenciled pixels untouched.
    Session s(toy_backends(0.3));
    s.start(canvas, stencil.bitmap, single_prompt("tree, cubist"), {}, config(steps, 7.5, 50));
    s.run_to_end();
    const Image out = s.preview();
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x)
            if (!stencil.bitmap.get(x, y) && !std::equal(out.pixel(x, y), out.pixel(x, y) + 4, canvas.pixel(x, y)))
                v.fail("unstenciled pixel changed at " + std::to_string(x) + "," + std::to_string(y));
    if (v.pass) v.detail = "5 overcoat levels x 50 steps, regions A1/A2/B/C = " + std::to_string(regions.count(Region::A1)) + "/" +
                           std::to_string(regions.count(Region::A2)) + "/" + std::to_string(regions.count(Region::B)) + "/" +
                           std::to_string(regions.count(Region::C));
    return v;
}

// ---------------------------------------------------------------------------
// Overcoat direction

inline double cosine_over(const LatentTensor& a, const LatentTensor& b, const RegionMap& regions, Region r) {
    long double dot = 0, na = 0, nb = 0;
    const std::size_t plane = regions.labels.size();
    for (std::size_t c = 0; c < a.dim(0); ++c) {
        for (std::size_t cell = 0; cell < plane; ++cell) {
            if (regions.labels[cell] != r) continue;
            const long double x = a[c * plane + cell], y = b[c * plane + cell];
            dot += x * y;
            na += x * x;
            nb += y * y;
        }
    }
    return static_cast<double>(dot / std::sqrt(na * nb));
}

inline std::vector<double> overcoat_similarities(const std::vector<int>& levels, std::uint64_t seed) {
    const std::size_t size = 64;
    const auto backends = toy_backends(0.3);
    // The original: a generated image occupying the left three quarters.
    Session first(backends);
    first.start(Image(size, size), box(size, 0, 0, 48, 64), single_prompt("woman, high renaissance"), {}, config(50, 7.5, 0, seed));
    first.run_to_end();
    const Image original = first.preview();

    std::vector<double> sims;
    for (int o : levels) {
        Session s(backends);
        s.start(original, Bitmap(size, size, true), single_prompt("man, cyberpunk"), {}, config(50, 7.5, o, seed + 1));
        s.run_to_end();
        sims.push_back(cosine_over(s.latent(), s.canvas_latent(), s.regions(), Region::A2));
    }
    return sims;
}

inline Verdict overcoat_direction() {
    Verdict v;
    const std::vector<int> levels = {0, 25, 50, 75, 100};
    std::string trace;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto sims = overcoat_similarities(levels, seed * 10);
        for (std::size_t i = 0; i < sims.size(); ++i) {
            if (!std::isfinite(sims[i])) v.fail("non-finite similarity");
            if (i && sims[i] > sims[i - 1]) {
                v.fail("similarity rises from o=" + std::to_string(levels[i - 1]) + " to o=" + std::to_string(levels[i]) +
                       " (seed set " + std::to_string(seed) + ")");
            }
        }
        if (seed == 1u)
            for (double s : sims) trace += (trace.empty() ? "" : " ") + fmt(s);
    }
    if (v.pass) v.detail = "A2 cosine at o=0..100: " + trace;
    return v;
}

// ---------------------------------------------------------------------------
// Intervention prefix determinism

inline Verdict intervention_prefix() {
    Verdict v;
    const std::size_t size = 64;
    const auto backends = toy_backends(0.3);
    const Bitmap full(size, size, true);
    auto start = [&](Session& s) { s.start(Image(size, size), full, single_prompt("cat, cubist"), {}, config(50, 7.5, 0, 21)); };

    Session base(backends);
    start(base);
    base.run_to_end();

    for (int t : {1, 10, 25, 49}) {
        Session s(backends);
        start(s);
        while (s.cursor() < t) s.step();
        s.intervene(single_prompt("dog, cubist"), std::nullopt);
        s.run_to_end();
        for (int k = 0; k < 50; ++k) {
            const bool same = s.entries()[k].latent == base.entries()[k].latent;
            if (k < t && !same) v.fail("t=" + std::to_string(t) + ": step " + std::to_string(k) + " differs before the intervention");
            if (k >= t && same) v.fail("t=" + std::to_string(t) + ": step " + std::to_string(k) + " unchanged after the intervention");
        }
    }

    for (int k : {0, 20, 49}) {
        Session s(backends);
        start(s);
        s.run_to_end();
        s.rollback(k);
        s.resume();
        s.run_to_end();
        if (!(s.latent() == base.latent())) v.fail("rollback to " + std::to_string(k) + " + resume changed the final latent");
        for (int j = 0; j < 50; ++j)
            if (!(s.entries()[j].latent == base.entries()[j].latent)) v.fail("rollback replay diverges at step " + std::to_string(j));
    }
    if (v.pass) v.detail = "t in {1,10,25,49}, rollback to {0,20,49}";
    return v;
}

// ---------------------------------------------------------------------------
// Characterisation trend

inline charbench::SweepSpec desk_spec() {
    charbench::SweepSpec spec;
    spec.conditions = {charbench::Condition::mixing, charbench::Condition::directional, charbench::Condition::stencil,
                       charbench::Condition::intervention, charbench::Condition::concatenation};
    spec.pairs = {{charbench::AttributeType::objects, "cat", "dog"},
                  {charbench::AttributeType::styles, "cubist", "impressionism"}};
    spec.weights = {0.25, 0.5, 0.75};
    spec.sets_per_pair = 2;
    spec.meta_seed = 2023;
    spec.steps = 50;
    spec.guide_scale = 7.5;
    return spec;
}

inline charbench::SweepResult run_desk(const charbench::SweepSpec& spec) {
    charbench::Runner runner(spec, [] { return toy_backends(0.3); }, 64);
    return runner.run();
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Verdict characterisation_trend(const std::filesystem::path& scratch) {
    Verdict v;
    const auto spec = desk_spec();
    const auto first = run_desk(spec);
    const auto second = run_desk(spec);
    if (!first.failures.empty()) v.fail(std::to_string(first.failures.size()) + " records failed");
    if (first.records.size() != 2 * 2 * (4 * 3 + 1)) v.fail("unexpected record count " + std::to_string(first.records.size()));

    // Trend per (pair, set) group and condition.
    int checked = 0;
    for (auto cond : {charbench::Condition::intervention, charbench::Condition::stencil}) {
        for (std::size_t i = 0; i + 2 < first.records.size(); ++i) {
            const auto& a = first.records[i];
            if (a.condition != cond || a.weight != 0.25) continue;
            const auto& b = first.records[i + 1];
            const auto& c = first.records[i + 2];
            if (b.weight != 0.5 || c.weight != 0.75 || b.condition != cond || c.condition != cond) {
                v.fail("records out of order");
                continue;
            }
            ++checked;
            if (a.latent_cosine_similarity < b.latent_cosine_similarity || b.latent_cosine_similarity < c.latent_cosine_similarity) {
                v.fail(std::string(charbench::condition_name(cond)) + " similarity increases with weight for " + a.pair.original +
                       "->" + a.pair.additional);
            }
        }
    }
    if (checked != 8) v.fail("expected 8 trend groups, saw " + std::to_string(checked));

    // Weight 0 mixing reproduces the original.
    auto zero = spec;
    zero.conditions = {charbench::Condition::mixing};
    zero.weights = {0.0};
    for (const auto& r : run_desk(zero).records) {
        if (!(r.iterated.latent == r.original.latent) || !(r.iterated.image == r.original.image) || r.grid != "extended") {
            v.fail("weight-0 mixing differs from the original");
        }
    }

    // Byte-identical CSV across runs, through the file writer.
    const auto dir_a = scratch / "sweep_a", dir_b = scratch / "sweep_b";
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
    charbench::write_outputs(dir_a, first);
    charbench::write_outputs(dir_b, second);
    const auto csv_a = read_file(dir_a / "records.csv");
    if (csv_a.empty() || csv_a != read_file(dir_b / "records.csv")) v.fail("records.csv differs between runs");
    if (v.pass) v.detail = std::to_string(first.records.size()) + " records, 8 trend groups, csv sha " + sha256_hex(csv_a).substr(0, 12);
    return v;
}

// ---------------------------------------------------------------------------
// Protocol replay

struct ReplayGolden {
    std::vector<std::string> frame_hashes;
    std::string transcript;
};

inline json replay_script(const std::filesystem::path& golden_dir) {
    return json::parse(read_file(golden_dir / "replay_script.json"));
}

inline ReplayGolden load_golden(const std::filesystem::path& golden_dir) {
    ReplayGolden g;
    std::istringstream frames(read_file(golden_dir / "replay_frames.txt"));
    for (std::string line; std::getline(frames, line);)
        if (!line.empty()) g.frame_hashes.push_back(line);
    g.transcript = read_file(golden_dir / "replay_transcript.bin");
    return g;
}

inline void write_golden(const std::filesystem::path& golden_dir, const ReplayResult& r) {
    std::ofstream frames(golden_dir / "replay_frames.txt", std::ios::binary | std::ios::trunc);
    for (const auto& h : r.frame_hashes) frames << h << "\n";
    std::ofstream bin(golden_dir / "replay_transcript.bin", std::ios::binary | std::ios::trunc);
    bin << r.transcript;
}

inline Verdict protocol_replay(const std::filesystem::path& golden_dir) {
    Verdict v;
    const auto script = replay_script(golden_dir);
    const auto first = run_replay(script, {});
    const auto second = run_replay(script, {});
    const auto golden = load_golden(golden_dir);
    if (first.final_status != "done" || first.final_cursor != 50) v.fail("replay ended " + first.final_status);
    // 30 frames before the stop, 30 more after rolling back to 20.
    if (first.frame_hashes.size() != 60) v.fail("expected 60 frames, got " + std::to_string(first.frame_hashes.size()));
    if (first.transcript != second.transcript) v.fail("two replays produced different bytes");
    if (first.frame_hashes != golden.frame_hashes) v.fail("frame hashes differ from golden");
    if (first.transcript != golden.transcript) v.fail("transcript bytes differ from golden");
    for (const auto& e : first.outbound)
        if (e.type == "error") v.fail("error envelope: " + e.payload.dump());
    if (v.pass) v.detail = std::to_string(first.frame_hashes.size()) + " frames, transcript sha " + sha256_hex(first.transcript).substr(0, 12);
    return v;
}

}  // namespace scenario
