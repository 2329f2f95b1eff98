// SPDX-License-Identifier: Apache-2.0
#pragma once

// Characterisation sweep: pairs of attributes of one type, generated with
// each editing condition at several weights, scored with computed similarity
// proxies. Human rating columns are written empty.
//
// Spec (JSON, every field optional):
//   conditions     ["mixing", "directional", "stencil", "intervention", "concatenation"]
//   target_types   ["objects", "styles", "specific"]
//   weights        [0.25, 0.5, 0.75]   other values are marked "extended"
//   pairs          [{"type", "original", "additional"}]  explicit pair list
//   max_pairs      72                  cap when pairs are sampled
//   sets_per_pair  2
//   meta_seed      0
//   steps          50
//   guide_scale    7.5
//   backend        {"kind", "gamma", "latent_size", "url"}
//
// Weight mapping: mixing w -> mix weights (1 - w, w); directional w -> axis
// weight; stencil w -> overcoat 100 w; intervention w -> prompt switch at
// step floor((1 - w) K). Concatenation has no weight.

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pigment/error.hpp"
#include "pigment/image.hpp"
#include "pigment/png.hpp"
#include "pigment/random.hpp"
#include "pigment/session.hpp"
#include "pigment/wire.hpp"

namespace pigment::charbench {

enum class AttributeType { objects, styles, specific };
enum class Condition { mixing, directional, stencil, intervention, concatenation };

inline constexpr std::array<std::string_view, 8> kObjects = {"tree", "river", "man", "woman", "dog", "cat", "love", "hate"};
inline constexpr std::array<std::string_view, 8> kStyles = {
    "cubist", "surrealism", "action painting", "high renaissance", "impressionism", "cyberpunk", "unreal engine", "VSCO"};
inline constexpr std::array<std::string_view, 8> kSpecific = {"vivid color", "subtle color", "rough texture",
                                                              "smooth texture", "fine line",  "thick line",
                                                              "curvy shape", "angular shape"};
inline constexpr std::array<double, 3> kGridWeights = {0.25, 0.5, 0.75};
inline constexpr std::size_t kDefaultMaxPairs = 72;

inline const std::array<std::string_view, 8>& vocabulary(AttributeType t) {
    switch (t) {
        case AttributeType::objects: return kObjects;
        case AttributeType::styles: return kStyles;
        case AttributeType::specific: return kSpecific;
    }
    throw ContractError("bad_spec", "unknown attribute type");
}

inline const char* type_name(AttributeType t) {
    switch (t) {
        case AttributeType::objects: return "objects";
        case AttributeType::styles: return "styles";
        case AttributeType::specific: return "specific";
    }
    return "?";
}

inline AttributeType parse_type(const std::string& s) {
    for (auto t : {AttributeType::objects, AttributeType::styles, AttributeType::specific})
        if (s == type_name(t)) return t;
    throw ContractError("bad_spec", "unknown attribute type '" + s + "'");
}

inline const char* condition_name(Condition c) {
    switch (c) {
        case Condition::mixing: return "mixing";
        case Condition::directional: return "directional";
        case Condition::stencil: return "stencil";
        case Condition::intervention: return "intervention";
        case Condition::concatenation: return "concatenation";
    }
    return "?";
}

inline Condition parse_condition(const std::string& s) {
    for (auto c : {Condition::mixing, Condition::directional, Condition::stencil, Condition::intervention,
                   Condition::concatenation})
        if (s == condition_name(c)) return c;
    throw ContractError("bad_spec", "unknown condition '" + s + "'");
}

// Comma-joined in the order object, style, specific; empty parts skipped.
inline std::string compose_prompt(std::string_view object, std::string_view style, std::string_view specific = {}) {
    std::string out;
    for (auto part : {object, style, specific}) {
        if (part.empty()) continue;
        if (!out.empty()) out += ", ";
        out += part;
    }
    if (out.empty()) throw ContractError("bad_prompt", "a prompt needs at least one attribute");
    return out;
}

inline std::string concatenate(std::string_view original, std::string_view additional) {
    return "the mix of " + std::string(original) + " and " + std::string(additional);
}

// The attributes that stay fixed while the target attribute changes.
struct Context {
    std::string object;
    std::string style;
    std::string specific;
};

inline std::string prompt_with(AttributeType type, std::string_view target, const Context& ctx) {
    switch (type) {
        case AttributeType::objects: return compose_prompt(target, ctx.style);
        case AttributeType::styles: return compose_prompt(ctx.object, target);
        case AttributeType::specific: return compose_prompt(ctx.object, ctx.style, target);
    }
    throw ContractError("bad_spec", "unknown attribute type");
}

inline std::string context_string(AttributeType type, const Context& ctx) {
    switch (type) {
        case AttributeType::objects: return ctx.style;
        case AttributeType::styles: return ctx.object;
        case AttributeType::specific: return ctx.object + "; " + ctx.style;
    }
    return {};
}

struct AttributePair {
    AttributeType type = AttributeType::objects;
    std::string original;
    std::string additional;
};

struct SweepSpec {
    std::vector<Condition> conditions = {Condition::mixing, Condition::directional, Condition::stencil,
                                         Condition::intervention, Condition::concatenation};
    std::vector<AttributeType> target_types = {AttributeType::objects, AttributeType::styles, AttributeType::specific};
    std::vector<double> weights = {kGridWeights.begin(), kGridWeights.end()};
    std::vector<AttributePair> pairs;  // empty: sample
    std::size_t max_pairs = kDefaultMaxPairs;
    std::size_t sets_per_pair = 2;
    std::uint64_t meta_seed = 0;
    int steps = 50;
    double guide_scale = 7.5;

    void validate() const {
        for (double w : weights)
            if (!(w >= 0.0 && w <= 1.0)) throw ContractError("bad_spec", "weights must lie in [0, 1]");
        for (const auto& p : pairs) {
            const auto& vocab = vocabulary(p.type);
            auto known = [&](const std::string& a) { return std::find(vocab.begin(), vocab.end(), a) != vocab.end(); };
            if (!known(p.original) || !known(p.additional) || p.original == p.additional) {
                throw ContractError("bad_spec", "pair " + p.original + "/" + p.additional + " is not two distinct " +
                                                    type_name(p.type) + " attributes");
            }
        }
        if (sets_per_pair == 0) throw ContractError("bad_spec", "sets_per_pair must be positive");
        GenerationConfig{steps, guide_scale}.validate();
    }
};

inline SweepSpec parse_spec(const nlohmann::json& j) {
    SweepSpec s;
    if (j.contains("conditions")) {
        s.conditions.clear();
        for (const auto& c : j.at("conditions")) s.conditions.push_back(parse_condition(c.get<std::string>()));
    }
    if (j.contains("target_types")) {
        s.target_types.clear();
        for (const auto& t : j.at("target_types")) s.target_types.push_back(parse_type(t.get<std::string>()));
    }
    if (j.contains("weights")) s.weights = j.at("weights").get<std::vector<double>>();
    if (j.contains("pairs")) {
        for (const auto& p : j.at("pairs")) {
            s.pairs.push_back({parse_type(p.at("type").get<std::string>()), p.at("original").get<std::string>(),
                               p.at("additional").get<std::string>()});
        }
    }
    s.max_pairs = j.value("max_pairs", s.max_pairs);
    s.sets_per_pair = j.value("sets_per_pair", s.sets_per_pair);
    s.meta_seed = j.value("meta_seed", s.meta_seed);
    s.steps = j.value("steps", s.steps);
    s.guide_scale = j.value("guide_scale", s.guide_scale);
    s.validate();
    return s;
}

// All ordered pairs of distinct attributes for the requested types, or a
// uniform sample of max_pairs of them drawn with the meta seed.
inline std::vector<AttributePair> select_pairs(const SweepSpec& spec) {
    if (!spec.pairs.empty()) return spec.pairs;
    std::vector<AttributePair> all;
    for (auto t : spec.target_types) {
        const auto& v = vocabulary(t);
        for (const auto& a : v)
            for (const auto& b : v)
                if (a != b) all.push_back({t, std::string(a), std::string(b)});
    }
    if (all.size() <= spec.max_pairs) return all;
    NormalStream rng(spec.meta_seed, stream_id(StreamDomain::sampling, 0));
    for (std::size_t i = 0; i < spec.max_pairs; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.next_u64() % (all.size() - i));
        std::swap(all[i], all[j]);
    }
    all.resize(spec.max_pairs);
    return all;
}

struct SampleSet {
    Context context;
    std::uint64_t init_seed = 0;
    std::uint64_t overcoat_seed = 0;
};

// Set s of pair p: its own rng stream, so records do not depend on order.
inline SampleSet sample_set(const SweepSpec& spec, std::size_t pair_index, std::size_t set_index) {
    NormalStream rng(spec.meta_seed,
                     stream_id(StreamDomain::sampling, static_cast<std::uint32_t>(1 + pair_index * spec.sets_per_pair + set_index)));
    SampleSet s;
    s.context.object = std::string(kObjects[rng.next_u64() % kObjects.size()]);
    s.context.style = std::string(kStyles[rng.next_u64() % kStyles.size()]);
    s.init_seed = rng.next_u64() >> 32;
    s.overcoat_seed = rng.next_u64() >> 32;
    if (s.overcoat_seed == s.init_seed) ++s.overcoat_seed;
    return s;
}

inline double latent_cosine_similarity(const LatentTensor& a, const LatentTensor& b) {
    require_same_shape(a, b, "cosine similarity");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) return na == nb ? 1.0 : 0.0;
    return dot / std::sqrt(na * nb);
}

// Mean squared difference over RGB, 0..255 scale.
inline double pixel_mse(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height) throw ContractError("resolution_mismatch", "images differ in size");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.rgba.size(); ++i) {
        if (i % 4 == 3) continue;
        const double d = static_cast<double>(a.rgba[i]) - static_cast<double>(b.rgba[i]);
        acc += d * d;
    }
    const auto n = a.width * a.height * 3;
    return n ? acc / static_cast<double>(n) : 0.0;
}

struct Generation {
    LatentTensor latent;
    Image image;
};

struct SweepRecord {
    std::string id;
    Condition condition = Condition::mixing;
    AttributePair pair;
    std::string context;
    std::string original_prompt;
    std::string iterated_prompt;
    std::optional<double> weight;  // none for concatenation
    std::string grid;              // standard | extended | n/a
    std::optional<int> switch_step;
    std::optional<double> overcoat;
    std::uint64_t init_seed = 0;
    std::uint64_t overcoat_seed = 0;
    int steps = 0;
    double guide_scale = 0.0;
    double latent_cosine_similarity = 0.0;
    double pixel_mse = 0.0;
    Generation original;
    Generation iterated;
};

struct SweepFailure {
    std::string record_id;
    std::string message;
};

struct SweepResult {
    std::vector<SweepRecord> records;
    std::vector<SweepFailure> failures;
};

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Runner {
public:
    Runner(SweepSpec spec, std::function<SessionBackends()> make_backends, std::size_t canvas_size)
        : spec_(std::move(spec)), make_backends_(std::move(make_backends)), size_(canvas_size) {
        spec_.validate();
    }

    SweepResult run() {
        SweepResult result;
        const auto pairs = select_pairs(spec_);
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            for (std::size_t s = 0; s < spec_.sets_per_pair; ++s) run_set(pairs[p], sample_set(spec_, p, s), result);
        }
        return result;
    }

private:
    GenerationConfig config(const SampleSet& set, double overcoat = 0.0) const {
        GenerationConfig c;
        c.steps = spec_.steps;
        c.guide_scale = spec_.guide_scale;
        c.single_stroke = spec_.steps;
        c.overcoat = overcoat;
        c.init_seed = set.init_seed;
        c.overcoat_seed = set.overcoat_seed;
        return c;
    }

    Generation finish(Session& s) const {
        s.run_to_end();
        return {s.latent(), s.preview()};
    }

    Generation generate(const PromptMix& mix, const std::vector<AxisSetting>& axes, const GenerationConfig& c,
                        const Image& canvas) const {
        Session s(make_backends_());
        s.start(canvas, Bitmap(size_, size_, true), mix, axes, c);
        return finish(s);
    }

    static PromptMix two_prompt_mix(const std::string& a, const std::string& b, double w) {
        return {{"original", "additional"}, {a, b}, MixWeights({1.0 - w, w})};
    }

    void run_set(const AttributePair& pair, const SampleSet& set, SweepResult& result) {
        const auto original_prompt = prompt_with(pair.type, pair.original, set.context);
        const auto additional_prompt = prompt_with(pair.type, pair.additional, set.context);
        const Image blank(size_, size_);

        std::optional<Generation> original;
        std::string original_error;
        try {
            original = generate(single_prompt(original_prompt, "original"), {}, config(set), blank);
        } catch (const Error& e) {
            original_error = e.what();
        }

        for (auto condition : spec_.conditions) {
            std::vector<std::optional<double>> weights;
            if (condition == Condition::concatenation) {
                weights.push_back(std::nullopt);
            } else {
                for (double w : spec_.weights) weights.push_back(w);
            }
            for (const auto& w : weights) {
                SweepRecord r;
                r.condition = condition;
                r.pair = pair;
                r.context = context_string(pair.type, set.context);
                r.original_prompt = original_prompt;
                r.iterated_prompt = additional_prompt;
                r.weight = w;
                r.grid = !w ? "n/a"
                            : (std::find(kGridWeights.begin(), kGridWeights.end(), *w) != kGridWeights.end() ? "standard"
                                                                                                             : "extended");
                r.init_seed = set.init_seed;
                r.overcoat_seed = set.overcoat_seed;
                r.steps = spec_.steps;
                r.guide_scale = spec_.guide_scale;
                r.id = record_id(r);
                if (!original) {
                    result.failures.push_back({r.id, "original generation failed: " + original_error});
                    continue;
                }
                try {
                    r.original = *original;
                    r.iterated = iterate(r, additional_prompt, set);
                    r.latent_cosine_similarity = latent_cosine_similarity(r.original.latent, r.iterated.latent);
                    r.pixel_mse = pixel_mse(r.original.image, r.iterated.image);
                    if (!std::isfinite(r.latent_cosine_similarity) || !std::isfinite(r.pixel_mse)) {
                        throw NumericError("non-finite similarity metric");
                    }
                    result.records.push_back(std::move(r));
                } catch (const Error& e) {
                    result.failures.push_back({r.id, e.what()});
                }
            }
        }
    }

    Generation iterate(SweepRecord& r, const std::string& additional_prompt, const SampleSet& set) const {
        const Image blank(size_, size_);
        const double w = r.weight.value_or(0.0);
        switch (r.condition) {
            case Condition::mixing:
                return generate(two_prompt_mix(r.original_prompt, additional_prompt, w), {}, config(set), blank);
            case Condition::directional: {
                r.iterated_prompt = r.original_prompt;
                AxisSetting axis{"target", r.pair.additional, r.pair.original, {}, {}, w};
                return generate(single_prompt(r.original_prompt, "original"), {axis}, config(set), blank);
            }
            case Condition::stencil: {
                r.overcoat = 100.0 * w;
                return generate(single_prompt(additional_prompt, "additional"), {}, config(set, *r.overcoat),
                                r.original.image);
            }
            case Condition::intervention: {
                const int k = static_cast<int>(std::floor((1.0 - w) * spec_.steps));
                r.switch_step = k;
                Session s(make_backends_());
                s.start(blank, Bitmap(size_, size_, true), single_prompt(r.original_prompt, "original"), {}, config(set));
                while (s.status() == SessionStatus::running && s.cursor() < k) s.step();
                if (s.status() == SessionStatus::running) s.intervene(single_prompt(additional_prompt, "additional"), std::nullopt);
                return finish(s);
            }
            case Condition::concatenation: {
                const auto target = concatenate(r.pair.original, r.pair.additional);
                r.iterated_prompt = prompt_with(r.pair.type, target, set.context);
                return generate(single_prompt(r.iterated_prompt, "concatenated"), {}, config(set), blank);
            }
        }
        throw ContractError("bad_spec", "unknown condition");
    }

    static std::string record_id(const SweepRecord& r) {
        const std::string key = std::string(condition_name(r.condition)) + "|" + type_name(r.pair.type) + "|" +
                                r.pair.original + "|" + r.pair.additional + "|" + r.context + "|" +
                                (r.weight ? format_double(*r.weight) : "-") + "|" + std::to_string(r.init_seed) + "|" +
                                std::to_string(r.overcoat_seed) + "|" + std::to_string(r.steps) + "|" +
                                format_double(r.guide_scale);
        return sha256_hex(key).substr(0, 16);
    }

    SweepSpec spec_;
    std::function<SessionBackends()> make_backends_;
    std::size_t size_;
};

// ---------------------------------------------------------------------------
// Output

inline const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> cols = {
        "record_id", "condition", "target_type", "original", "additional", "non_target", "original_prompt",
        "iterated_prompt", "weight", "grid", "switch_step", "overcoat", "init_seed", "overcoat_seed", "steps",
        "guide_scale", "latent_cosine_similarity", "pixel_mse", "addition", "remain", "similarity",
        "addition_approach"};
    return cols;
}

// RFC 4180 field quoting.
inline std::string csv_field(std::string_view v) {
    if (v.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(v);
    std::string out = "\"";
    for (char c : v) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string csv_row(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) line += ',';
        line += csv_field(fields[i]);
    }
    return line + "\r\n";
}

inline std::string to_csv(const std::vector<SweepRecord>& records) {
    std::string out = csv_row(csv_columns());
    for (const auto& r : records) {
        out += csv_row({r.id, condition_name(r.condition), type_name(r.pair.type), r.pair.original, r.pair.additional,
                        r.context, r.original_prompt, r.iterated_prompt, r.weight ? format_double(*r.weight) : "",
                        r.grid, r.switch_step ? std::to_string(*r.switch_step) : "",
                        r.overcoat ? format_double(*r.overcoat) : "", std::to_string(r.init_seed),
                        std::to_string(r.overcoat_seed), std::to_string(r.steps), format_double(r.guide_scale),
                        format_double(r.latent_cosine_similarity), format_double(r.pixel_mse), "", "", "", ""});
    }
    return out;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("io", "cannot write " + path.string());
}

inline void write_outputs(const std::filesystem::path& dir, const SweepResult& result) {
    std::filesystem::create_directories(dir);
    const auto csv = to_csv(result.records);
    write_file(dir / "records.csv", std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
    for (const auto& r : result.records) {
        write_file(dir / (r.id + "_orig.png"), encode_png(r.original.image));
        write_file(dir / (r.id + "_iter.png"), encode_png(r.iterated.image));
    }
}

}  // namespace pigment::charbench
