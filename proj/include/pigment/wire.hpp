// SPDX-License-Identifier: Apache-2.0
#pragma once

// Wire format shared by the client protocol and the remote-backend protocol.
//
// An envelope is a UTF-8 JSON object {type, session_id, seq, payload}.
// Keys are emitted in sorted order, so serialisation is canonical. On byte
// streams each envelope is preceded by its length as a 4-byte big-endian
// integer. Tensors travel as {shape, dtype: "f32le", data: base64}.
// Rasters travel as base64 PNG.

#include <openssl/evp.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pigment/error.hpp"
#include "pigment/image.hpp"
#include "pigment/png.hpp"
#include "pigment/tensor.hpp"

namespace pigment {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Bytes

inline std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

inline std::vector<std::uint8_t> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw ContractError("malformed", "base64 length is not a multiple of 4");
    std::vector<std::uint8_t> out(3 * text.size() / 4);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) throw ContractError("malformed", "invalid base64 payload");
    // EVP_DecodeBlock keeps the zero bytes that stand in for '=' padding.
    std::size_t pad = 0;
    if (!text.empty() && text.back() == '=') ++pad;
    if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

inline std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr)) {
        throw Error("digest", "sha256 failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[digest[i] >> 4];
        out += kHex[digest[i] & 0xf];
    }
    return out;
}

inline std::string sha256_hex(std::string_view text) {
    return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

template <typename T>
std::string sha256_hex(const Tensor<T>& t) {
    return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(t.values().data()), t.size() * sizeof(T)));
}

// ---------------------------------------------------------------------------
// Tensors and rasters

template <typename T>
json tensor_to_json(const Tensor<T>& t) {
    std::vector<std::uint8_t> bytes(t.size() * 4);
    for (std::size_t i = 0; i < t.size(); ++i) {
        auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(t[i]));
        for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<std::uint8_t>(bits >> (8 * b));
    }
    return json{{"shape", t.shape()}, {"dtype", "f32le"}, {"data", base64_encode(bytes)}};
}

template <typename T>
Tensor<T> tensor_from_json(const json& j) {
    if (!j.is_object() || !j.contains("shape") || !j.contains("data")) {
        throw ContractError("malformed", "tensor payload needs shape and data");
    }
    if (j.value("dtype", "f32le") != "f32le") throw ContractError("malformed", "unsupported tensor dtype");
    Shape shape;
    for (const auto& d : j.at("shape")) {
        if (!d.is_number_unsigned()) throw ContractError("malformed", "tensor shape entries must be unsigned integers");
        shape.push_back(d.get<std::size_t>());
    }
    const auto bytes = base64_decode(j.at("data").get<std::string>());
    if (bytes.size() != 4 * element_count(shape)) {
        throw ContractError("malformed", "tensor blob holds " + std::to_string(bytes.size()) +
                                             " bytes for shape " + shape_string(shape));
    }
    std::vector<T> values(element_count(shape));
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
        values[i] = static_cast<T>(std::bit_cast<float>(bits));
    }
    return Tensor<T>(std::move(shape), std::move(values));
}

inline std::string image_to_base64_png(const Image& img) { return base64_encode(encode_png(img)); }

inline Image image_from_base64_png(const std::string& text) {
    const auto bytes = base64_decode(text);
    return decode_png(bytes);
}

// ---------------------------------------------------------------------------
// Envelopes

struct Envelope {
    std::string type;
    std::string session_id;
    std::uint64_t seq = 0;
    json payload = json::object();

    friend bool operator==(const Envelope&, const Envelope&) = default;
};

inline json to_json_value(const Envelope& e) {
    return json{{"type", e.type}, {"session_id", e.session_id}, {"seq", e.seq}, {"payload", e.payload}};
}

inline std::string serialize(const Envelope& e) { return to_json_value(e).dump(); }

// Throws ContractError("malformed") for anything that is not a well-formed envelope.
inline Envelope parse_envelope(std::string_view text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ContractError("malformed", "envelope is not a JSON object");
    if (!j.contains("type") || !j["type"].is_string()) throw ContractError("malformed", "envelope lacks a type");
    if (!j.contains("seq") || !j["seq"].is_number_unsigned()) {
        throw ContractError("malformed", "envelope lacks an unsigned seq");
    }
    Envelope e;
    e.type = j["type"].get<std::string>();
    e.seq = j["seq"].get<std::uint64_t>();
    if (j.contains("session_id")) {
        if (!j["session_id"].is_string()) throw ContractError("malformed", "session_id must be a string");
        e.session_id = j["session_id"].get<std::string>();
    }
    if (j.contains("payload")) {
        if (!j["payload"].is_object()) throw ContractError("malformed", "payload must be an object");
        e.payload = std::move(j["payload"]);
    }
    return e;
}

inline void append_frame(std::string& out, std::string_view body) {
    const auto n = static_cast<std::uint32_t>(body.size());
    for (int shift = 24; shift >= 0; shift -= 8) out += static_cast<char>((n >> shift) & 0xff);
    out += body;
}

inline std::vector<std::string> split_frames(std::string_view stream) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < stream.size()) {
        if (stream.size() - pos < 4) throw ContractError("malformed", "truncated frame header");
        std::uint32_t n = 0;
        for (int i = 0; i < 4; ++i) n = (n << 8) | static_cast<unsigned char>(stream[pos + i]);
        pos += 4;
        if (stream.size() - pos < n) throw ContractError("malformed", "truncated frame body");
        out.emplace_back(stream.substr(pos, n));
        pos += n;
    }
    return out;
}

}  // namespace pigment
