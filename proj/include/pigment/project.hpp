// SPDX-License-Identifier: Apache-2.0
#pragma once

// Project files: one ustar archive holding
//   manifest.json          schema_version, canvas size, prompts, palette, axes,
//                          config defaults, layer table with PNG sha256
//   layers/<layer id>.png  one lossless raster per layer
//
// Loading validates everything before returning; a failure never yields a
// partially populated Project.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pigment/error.hpp"
#include "pigment/image.hpp"
#include "pigment/palette.hpp"
#include "pigment/png.hpp"
#include "pigment/serialize.hpp"
#include "pigment/session.hpp"
#include "pigment/tar.hpp"
#include "pigment/wire.hpp"

namespace pigment {

inline constexpr int kProjectSchemaVersion = 1;

struct Layer {
    std::string id;
    std::string name;
    bool visible = true;
    Image raster;

    friend bool operator==(const Layer&, const Layer&) = default;
};

struct PromptEntry {
    NodeId id;
    std::string text;
    Color color;

    friend bool operator==(const PromptEntry&, const PromptEntry&) = default;
};

struct Project {
    std::string id;
    std::string name;
    std::size_t width = 512;
    std::size_t height = 512;
    std::vector<Layer> layers;  // bottom to top
    std::vector<PromptEntry> prompts;
    PaletteState palette;
    std::vector<AxisSetting> axes;
    GenerationConfig config;

    void validate() const {
        std::set<std::string> ids;
        for (const auto& l : layers) {
            if (l.id.empty() || !std::all_of(l.id.begin(), l.id.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
                })) {
                throw ContractError("bad_layer", "layer id '" + l.id + "' must be [A-Za-z0-9_-]+");
            }
            if (!ids.insert(l.id).second) throw ContractError("bad_layer", "duplicate layer id '" + l.id + "'");
            if (l.raster.width != width || l.raster.height != height) {
                throw ContractError("resolution_mismatch", "layer '" + l.id + "' does not match the canvas size");
            }
        }
    }

    friend bool operator==(const Project&, const Project&) = default;
};

inline void to_json(nlohmann::json& j, const PromptEntry& p) { j = {{"id", p.id}, {"text", p.text}, {"color", p.color}}; }
inline void from_json(const nlohmann::json& j, PromptEntry& p) {
    p.id = j.at("id").get<std::string>();
    p.text = j.at("text").get<std::string>();
    p.color = j.value("color", Color{});
}

inline std::vector<std::uint8_t> write_project(const Project& p) {
    p.validate();
    std::vector<tar::Entry> entries;
    json layers = json::array();
    std::vector<tar::Entry> rasters;
    for (const auto& l : p.layers) {
        tar::Entry e{"layers/" + l.id + ".png", encode_png(l.raster)};
        layers.push_back({{"id", l.id}, {"name", l.name}, {"visible", l.visible}, {"file", e.name},
                          {"sha256", sha256_hex(e.data)}});
        rasters.push_back(std::move(e));
    }
    const json manifest{{"schema_version", kProjectSchemaVersion},
                        {"id", p.id},
                        {"name", p.name},
                        {"width", p.width},
                        {"height", p.height},
                        {"layers", std::move(layers)},
                        {"prompts", p.prompts},
                        {"palette", p.palette},
                        {"axes", p.axes},
                        {"config", p.config}};
    const std::string text = manifest.dump(2);
    entries.push_back({"manifest.json", {text.begin(), text.end()}});
    for (auto& r : rasters) entries.push_back(std::move(r));
    return tar::write(entries);
}

inline Project read_project(std::span<const std::uint8_t> bytes) {
    const auto entries = tar::read(bytes);
    std::map<std::string, const tar::Entry*> by_name;
    for (const auto& e : entries) by_name[e.name] = &e;
    const auto it = by_name.find("manifest.json");
    if (it == by_name.end()) throw LoadError("corrupt_archive", "project archive has no manifest.json");

    try {
        const auto& raw = it->second->data;
        const json m = json::parse(raw.begin(), raw.end());
        if (!m.contains("schema_version") || !m.at("schema_version").is_number_integer()) {
            throw LoadError("corrupt_manifest", "manifest lacks an integer schema_version");
        }
        const int version = m.at("schema_version").get<int>();
        if (version != kProjectSchemaVersion) {
            throw MigrationError("project schema_version " + std::to_string(version) + " cannot be read by this build (expects " +
                                 std::to_string(kProjectSchemaVersion) + ")");
        }
        Project p;
        p.id = m.at("id").get<std::string>();
        p.name = m.at("name").get<std::string>();
        p.width = m.at("width").get<std::size_t>();
        p.height = m.at("height").get<std::size_t>();
        p.prompts = m.at("prompts").get<std::vector<PromptEntry>>();
        p.palette = m.at("palette").get<PaletteState>();
        p.axes = m.at("axes").get<std::vector<AxisSetting>>();
        p.config = m.at("config").get<GenerationConfig>();
        for (const auto& l : m.at("layers")) {
            const auto file = l.at("file").get<std::string>();
            const auto member = by_name.find(file);
            if (member == by_name.end()) throw LoadError("corrupt_archive", "missing layer file " + file);
            if (sha256_hex(member->second->data) != l.at("sha256").get<std::string>()) {
                throw LoadError("corrupt_archive", "layer file " + file + " fails its checksum");
            }
            p.layers.push_back({l.at("id").get<std::string>(), l.at("name").get<std::string>(), l.at("visible").get<bool>(),
                                decode_png(member->second->data)});
        }
        p.validate();
        return p;
    } catch (const json::exception& e) {
        throw LoadError("corrupt_manifest", e.what());
    } catch (const ContractError& e) {
        throw LoadError("corrupt_manifest", e.what());
    }
}

// Directory of <id>.pigment archives. Writes go through a temp file and a
// rename; concurrent persists of one id are serialised.
class ProjectStore {
public:
    explicit ProjectStore(std::filesystem::path root) : root_(std::move(root)) { std::filesystem::create_directories(root_); }

    std::filesystem::path path_of(const std::string& id) const { return root_ / (id + ".pigment"); }

    // Projects without an id get one derived from their content.
    std::string persist(Project p) {
        if (p.id.empty()) p.id = "p" + sha256_hex(write_project(p)).substr(0, 12);
        const auto bytes = write_project(p);
        std::lock_guard lock(lock_for(p.id));
        const auto target = path_of(p.id);
        auto tmp = target;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
            if (!out) throw Error("io", "cannot write " + tmp.string());
        }
        std::filesystem::rename(tmp, target);
        return p.id;
    }

    Project load(const std::string& id) {
        std::lock_guard lock(lock_for(id));
        return load_file(path_of(id));
    }

    static Project load_file(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw LoadError("not_found", "cannot open " + path.string());
        std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return read_project(bytes);
    }

private:
    std::mutex& lock_for(const std::string& id) {
        std::lock_guard lock(table_);
        auto& m = locks_[id];
        if (!m) m = std::make_unique<std::mutex>();
        return *m;
    }

    std::filesystem::path root_;
    std::mutex table_;
    std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

}  // namespace pigment
