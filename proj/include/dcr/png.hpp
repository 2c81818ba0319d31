#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "dcr/core.hpp"

namespace dcr::io {

struct Window {
    double lo = -600.0;  // HU
    double hi = 500.0;
};

namespace detail {

inline void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

inline void put_chunk(std::vector<unsigned char>& out, const char* type, const std::vector<unsigned char>& data) {
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const uLong crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
    put_be32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace detail

/// 8-bit grayscale PNG of an HU image, linearly windowed; row 0 of the file is the top (largest y).
inline void write_png(const std::filesystem::path& path, const Image& image, Window window = {}) {
    if (image.unit != Unit::HU)
        throw DataError("write_png: image must be in HU");
    if (!(window.hi > window.lo))
        throw ConfigError("write_png: window upper bound must exceed lower bound");
    const int w = image.grid.nx, h = image.grid.ny;
    std::vector<unsigned char> raw;
    raw.reserve(static_cast<std::size_t>(h) * (static_cast<std::size_t>(w) + 1));
    for (int row = 0; row < h; ++row) {
        raw.push_back(0);  // filter: none
        const int j = h - 1 - row;
        for (int i = 0; i < w; ++i) {
            const double t = (image(i, j) - window.lo) / (window.hi - window.lo);
            raw.push_back(static_cast<unsigned char>(std::lround(255.0 * std::clamp(t, 0.0, 1.0))));
        }
    }
    uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> z(zlen);
    if (compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw DataError("write_png: compression failed");
    z.resize(zlen);

    std::vector<unsigned char> png{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<unsigned char> ihdr;
    detail::put_be32(ihdr, static_cast<std::uint32_t>(w));
    detail::put_be32(ihdr, static_cast<std::uint32_t>(h));
    ihdr.insert(ihdr.end(), {8, 0, 0, 0, 0});  // 8-bit grayscale, no interlace
    detail::put_chunk(png, "IHDR", ihdr);
    detail::put_chunk(png, "IDAT", z);
    detail::put_chunk(png, "IEND", {});

    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
    if (!out)
        throw DataError("write_png: cannot write " + path.string());
}

}  // namespace dcr::io
