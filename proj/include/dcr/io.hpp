#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcr/core.hpp"

namespace dcr::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kMagic = "DCRF1";

/// "x/y/name.json", "x/y/name.raw" or "x/y/name" all name the same array file.
inline fs::path stem_of(const fs::path& path) {
    fs::path p = path;
    if (p.extension() == ".json" || p.extension() == ".raw")
        p.replace_extension();
    return p;
}
inline fs::path header_path(const fs::path& path) { return fs::path(stem_of(path).string() + ".json"); }
inline fs::path payload_path(const fs::path& path) { return fs::path(stem_of(path).string() + ".raw"); }

inline json geometry_to_json(const FanBeamGeometry& g) {
    return json{{"sdd", g.sdd},       {"sid", g.sid},
                {"n_views", g.n_views}, {"n_det", g.n_det},
                {"n_det_virtual", g.n_det_virtual}, {"det_spacing", g.det_spacing},
                {"angles", g.angles}};
}

inline FanBeamGeometry geometry_from_json(const json& j) {
    FanBeamGeometry g;
    g.sdd = j.at("sdd").get<double>();
    g.sid = j.at("sid").get<double>();
    g.n_views = j.at("n_views").get<int>();
    g.n_det = j.at("n_det").get<int>();
    g.n_det_virtual = j.at("n_det_virtual").get<int>();
    g.det_spacing = j.at("det_spacing").get<double>();
    if (j.contains("angles")) {
        g.angles = j.at("angles").get<std::vector<double>>();
    } else {
        g.angles.resize(static_cast<std::size_t>(std::max(g.n_views, 0)));
        for (int v = 0; v < g.n_views; ++v)
            g.angles[static_cast<std::size_t>(v)] = 2.0 * kPi * v / g.n_views;
    }
    try {
        g.validate();
    } catch (const ConfigError& e) {
        throw DataError(std::string("array file geometry: ") + e.what());
    }
    return g;
}

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out)
        throw DataError("write failed: " + path.string());
}

inline std::vector<char> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open " + path.string());
    return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_floats(const fs::path& path, const std::vector<double>& values) {
    std::vector<char> bytes(values.size() * 4);
    for (std::size_t k = 0; k < values.size(); ++k) {
        auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[k]));
        if constexpr (std::endian::native == std::endian::big)
            bits = ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) | ((bits >> 8) & 0xff00u) | (bits >> 24);
        std::memcpy(bytes.data() + 4 * k, &bits, 4);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw DataError("write failed: " + path.string());
}

inline std::vector<double> decode_floats(const std::vector<char>& bytes, const fs::path& path) {
    std::vector<double> values(bytes.size() / 4);
    bool finite = true;
    for (std::size_t k = 0; k < values.size(); ++k) {
        std::uint32_t bits;
        std::memcpy(&bits, bytes.data() + 4 * k, 4);
        if constexpr (std::endian::native == std::endian::big)
            bits = ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) | ((bits >> 8) & 0xff00u) | (bits >> 24);
        values[k] = static_cast<double>(std::bit_cast<float>(bits));
        finite = finite && std::isfinite(values[k]);
    }
    if (!finite)
        std::cerr << "warning: " << path.string() << " contains non-finite values\n";
    return values;
}

}  // namespace detail

/// Parsed header plus raw payload bytes, validated against each other.
struct ArrayFile {
    json header;
    std::vector<char> payload;

    std::string kind() const { return header.at("kind").get<std::string>(); }
    std::size_t rows() const { return header.at("shape").at(0).get<std::size_t>(); }
    std::size_t cols() const { return header.at("shape").at(1).get<std::size_t>(); }
};

inline ArrayFile read_array_file(const fs::path& path) {
    const fs::path hp = header_path(path);
    json header;
    try {
        header = json::parse(detail::read_bytes(hp));
    } catch (const json::exception& e) {
        throw DataError(hp.string() + ": malformed header: " + e.what());
    }
    if (!header.is_object() || header.value("magic", std::string()) != kMagic)
        throw DataError(hp.string() + ": magic mismatch (expected " + kMagic + ")");
    const std::string kind = header.value("kind", std::string());
    if (kind != "image" && kind != "sinogram" && kind != "mask")
        throw DataError(hp.string() + ": unknown kind '" + kind + "'");
    if (!header.contains("shape") || !header["shape"].is_array() || header["shape"].size() != 2)
        throw DataError(hp.string() + ": shape must be [rows, cols]");

    const fs::path pp = hp.parent_path() / header.value("payload", payload_path(path).filename().string());
    ArrayFile f{header, detail::read_bytes(pp)};
    const std::size_t elem = kind == "mask" ? 1 : 4;
    if (f.rows() * f.cols() * elem != f.payload.size())
        throw DataError(pp.string() + ": payload is " + std::to_string(f.payload.size()) + " bytes, header implies " +
                        std::to_string(f.rows() * f.cols() * elem));
    return f;
}

inline json base_header(const std::string& kind, std::size_t rows, std::size_t cols, double sr, double sc,
                        const std::string& unit, const fs::path& path) {
    return json{{"magic", kMagic},
                {"kind", kind},
                {"shape", {rows, cols}},
                {"spacing_mm", {sr, sc}},
                {"unit", unit},
                {"dtype", kind == "mask" ? "uint8" : "float32"},
                {"endianness", "little"},
                {"payload", payload_path(path).filename().string()}};
}

inline void save_image(const fs::path& path, const Image& image, const json& provenance = json::object()) {
    const ImageGrid& g = image.grid;
    json h = base_header("image", static_cast<std::size_t>(g.ny), static_cast<std::size_t>(g.nx), g.dy, g.dx,
                         to_string(image.unit), path);
    h["center_mm"] = {g.cx, g.cy};
    h["provenance"] = provenance;
    detail::write_text(header_path(path), h.dump(2) + "\n");
    detail::write_floats(payload_path(path), image.values);
}

inline Image load_image(const fs::path& path) {
    const ArrayFile f = read_array_file(path);
    if (f.kind() != "image")
        throw DataError(header_path(path).string() + ": expected an image, found " + f.kind());
    const std::string unit = f.header.value("unit", std::string());
    if (unit != "HU" && unit != "mu_per_mm")
        throw DataError(header_path(path).string() + ": image unit must be HU or mu_per_mm");
    const auto spacing = f.header.at("spacing_mm").get<std::vector<double>>();
    std::vector<double> center{0.0, 0.0};
    if (f.header.contains("center_mm"))
        center = f.header.at("center_mm").get<std::vector<double>>();
    if (spacing.size() != 2 || center.size() != 2)
        throw DataError(header_path(path).string() + ": spacing_mm / center_mm must have two entries");
    ImageGrid grid;
    try {
        grid = ImageGrid(static_cast<int>(f.cols()), static_cast<int>(f.rows()), spacing[1], spacing[0], center[0],
                         center[1]);
    } catch (const ConfigError& e) {
        throw DataError(header_path(path).string() + ": " + e.what());
    }
    return Image(grid, unit == "HU" ? Unit::HU : Unit::MuPerMm, detail::decode_floats(f.payload, path));
}

inline void save_sinogram(const fs::path& path, const Sinogram& sino, const json& provenance = json::object()) {
    const FanBeamGeometry& g = sino.geometry;
    json h = base_header("sinogram", static_cast<std::size_t>(g.n_views), static_cast<std::size_t>(g.n_det_virtual),
                         0.0, g.det_spacing, "line_integral", path);  // rows are views: no length
    h["geometry"] = geometry_to_json(g);
    std::vector<int> mask(sino.measured_mask.begin(), sino.measured_mask.end());
    h["measured_mask"] = mask;
    h["provenance"] = provenance;
    detail::write_text(header_path(path), h.dump(2) + "\n");
    detail::write_floats(payload_path(path), sino.values);
}

inline Sinogram load_sinogram(const fs::path& path) {
    const ArrayFile f = read_array_file(path);
    if (f.kind() != "sinogram")
        throw DataError(header_path(path).string() + ": expected a sinogram, found " + f.kind());
    if (!f.header.contains("geometry"))
        throw DataError(header_path(path).string() + ": sinogram header lacks geometry");
    const FanBeamGeometry g = geometry_from_json(f.header.at("geometry"));
    if (f.rows() != static_cast<std::size_t>(g.n_views) || f.cols() != static_cast<std::size_t>(g.n_det_virtual))
        throw DataError(header_path(path).string() + ": shape does not match geometry");
    Sinogram s(g);
    s.values = detail::decode_floats(f.payload, path);
    if (f.header.contains("measured_mask")) {
        const auto m = f.header.at("measured_mask").get<std::vector<int>>();
        if (m.size() != static_cast<std::size_t>(g.n_det_virtual))
            throw DataError(header_path(path).string() + ": measured_mask length mismatch");
        for (std::size_t c = 0; c < m.size(); ++c)
            s.measured_mask[c] = m[c] != 0;
    }
    return s;
}

inline void save_mask(const fs::path& path, const Mask& mask, const json& provenance = json::object()) {
    const ImageGrid& g = mask.grid;
    json h = base_header("mask", static_cast<std::size_t>(g.ny), static_cast<std::size_t>(g.nx), g.dy, g.dx, "bool",
                         path);
    h["center_mm"] = {g.cx, g.cy};
    h["provenance"] = provenance;
    detail::write_text(header_path(path), h.dump(2) + "\n");
    std::ofstream out(payload_path(path), std::ios::binary);
    out.write(reinterpret_cast<const char*>(mask.flags.data()), static_cast<std::streamsize>(mask.flags.size()));
    if (!out)
        throw DataError("write failed: " + payload_path(path).string());
}

inline Mask load_mask(const fs::path& path) {
    const ArrayFile f = read_array_file(path);
    if (f.kind() != "mask")
        throw DataError(header_path(path).string() + ": expected a mask, found " + f.kind());
    const auto spacing = f.header.at("spacing_mm").get<std::vector<double>>();
    std::vector<double> center{0.0, 0.0};
    if (f.header.contains("center_mm"))
        center = f.header.at("center_mm").get<std::vector<double>>();
    Mask m(ImageGrid(static_cast<int>(f.cols()), static_cast<int>(f.rows()), spacing[1], spacing[0], center[0],
                     center[1]));
    for (std::size_t k = 0; k < f.payload.size(); ++k)
        m.flags[k] = f.payload[k] != 0 ? 1 : 0;
    return m;
}

}  // namespace dcr::io
