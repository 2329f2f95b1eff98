// SPDX-License-Identifier: Apache-2.0
#pragma once

// Minimal POSIX ustar reader/writer for regular files. Deterministic output:
// mtime, uid and gid are zero and entries keep insertion order.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pigment/error.hpp"

namespace pigment::tar {

inline constexpr std::size_t kBlock = 512;

struct Entry {
    std::string name;
    std::vector<std::uint8_t> data;

    friend bool operator==(const Entry&, const Entry&) = default;
};

namespace detail {

inline void put_octal(std::uint8_t* field, std::size_t width, std::uint64_t value) {
    // width - 1 digits followed by NUL.
    std::string digits(width - 1, '0');
    for (std::size_t i = width - 1; i-- > 0 && value;) {
        digits[i] = static_cast<char>('0' + (value & 7));
        value >>= 3;
    }
    if (value) throw ContractError("tar_overflow", "value does not fit a ustar field");
    std::copy(digits.begin(), digits.end(), field);
    field[width - 1] = 0;
}

inline std::uint64_t get_octal(const std::uint8_t* field, std::size_t width) {
    std::uint64_t v = 0;
    std::size_t i = 0;
    while (i < width && field[i] == ' ') ++i;
    for (; i < width && field[i] != 0 && field[i] != ' '; ++i) {
        if (field[i] < '0' || field[i] > '7') throw LoadError("corrupt_archive", "bad octal field in tar header");
        v = (v << 3) | static_cast<std::uint64_t>(field[i] - '0');
    }
    return v;
}

inline std::uint64_t header_checksum(const std::uint8_t* header) {
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < kBlock; ++i) sum += (i >= 148 && i < 156) ? ' ' : header[i];
    return sum;
}

}  // namespace detail

inline std::vector<std::uint8_t> write(std::span<const Entry> entries) {
    std::vector<std::uint8_t> out;
    for (const auto& e : entries) {
        if (e.name.empty() || e.name.size() > 99) throw ContractError("tar_name", "bad archive member name '" + e.name + "'");
        std::uint8_t h[kBlock] = {};
        std::copy(e.name.begin(), e.name.end(), h);
        detail::put_octal(h + 100, 8, 0644);
        detail::put_octal(h + 108, 8, 0);
        detail::put_octal(h + 116, 8, 0);
        detail::put_octal(h + 124, 12, e.data.size());
        detail::put_octal(h + 136, 12, 0);
        h[156] = '0';
        std::copy_n("ustar", 6, h + 257);
        h[263] = '0';
        h[264] = '0';
        const auto sum = detail::header_checksum(h);
        detail::put_octal(h + 148, 7, sum);
        h[155] = ' ';
        out.insert(out.end(), h, h + kBlock);
        out.insert(out.end(), e.data.begin(), e.data.end());
        out.resize(out.size() + (kBlock - e.data.size() % kBlock) % kBlock, 0);
    }
    out.resize(out.size() + 2 * kBlock, 0);
    return out;
}

inline std::vector<Entry> read(std::span<const std::uint8_t> bytes) {
    // Writers pad to whole blocks, so a ragged size means bytes went missing.
    if (bytes.size() % kBlock != 0) throw LoadError("corrupt_archive", "archive size is not a multiple of 512");
    std::vector<Entry> entries;
    std::size_t pos = 0;
    bool terminated = false;
    while (pos + kBlock <= bytes.size()) {
        const std::uint8_t* h = bytes.data() + pos;
        if (std::all_of(h, h + kBlock, [](std::uint8_t b) { return b == 0; })) {
            terminated = true;
            break;
        }
        if (std::string_view(reinterpret_cast<const char*>(h + 257), 5) != "ustar") {
            throw LoadError("corrupt_archive", "member header lacks ustar magic");
        }
        if (detail::get_octal(h + 148, 8) != detail::header_checksum(h)) {
            throw LoadError("corrupt_archive", "tar header checksum mismatch");
        }
        const std::size_t size = detail::get_octal(h + 124, 12);
        const char type = static_cast<char>(h[156]);
        pos += kBlock;
        if (size > bytes.size() - pos) throw LoadError("corrupt_archive", "archive member truncated");
        if (type == '0' || type == 0) {
            const auto* name = reinterpret_cast<const char*>(h);
            Entry e{std::string(name, strnlen(name, 100)), {bytes.begin() + pos, bytes.begin() + pos + size}};
            entries.push_back(std::move(e));
        }
        pos += (size + kBlock - 1) / kBlock * kBlock;
    }
    if (!terminated) throw LoadError("corrupt_archive", "archive has no end marker");
    return entries;
}

}  // namespace pigment::tar
