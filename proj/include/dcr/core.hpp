#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dcr {

/// Raised for invalid parameters or inconsistent configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised for malformed or inconsistent data (shapes, units, files).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;

/// Linear attenuation of water in 1/mm. Every HU <-> mu conversion uses it.
inline constexpr double kMuWater = 0.02;

enum class Unit { HU, MuPerMm };

inline const char* to_string(Unit u) { return u == Unit::HU ? "HU" : "mu_per_mm"; }

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/**
 * Regular 2-D pixel lattice. Pixel (i, j) has its center at
 *   x = cx + (i - (nx-1)/2) dx,   y = cy + (j - (ny-1)/2) dy
 * with i the column (x) index and j the row (y) index.
 */
struct ImageGrid {
    int nx = 0;
    int ny = 0;
    double dx = 1.0;
    double dy = 1.0;
    double cx = 0.0;
    double cy = 0.0;

    ImageGrid() = default;
    ImageGrid(int nx_, int ny_, double dx_, double dy_, double cx_ = 0.0, double cy_ = 0.0)
        : nx(nx_), ny(ny_), dx(dx_), dy(dy_), cx(cx_), cy(cy_) {
        validate();
    }

    void validate() const {
        if (nx <= 0 || ny <= 0)
            throw ConfigError("ImageGrid: pixel counts must be positive");
        if (!(dx > 0.0) || !(dy > 0.0))
            throw ConfigError("ImageGrid: pixel spacing must be positive");
        if (!std::isfinite(cx) || !std::isfinite(cy))
            throw ConfigError("ImageGrid: center must be finite");
    }

    std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i);
    }

    double x0() const { return cx - 0.5 * (nx - 1) * dx; }
    double y0() const { return cy - 0.5 * (ny - 1) * dy; }

    Point2 world(double i, double j) const { return {x0() + i * dx, y0() + j * dy}; }
    /// Continuous (column, row) index of a world position; exact inverse of world().
    Point2 to_index(Point2 p) const { return {(p.x - x0()) / dx, (p.y - y0()) / dy}; }

    /// Radius of the smallest isocentric circle containing the whole pixel lattice.
    double bounding_radius() const {
        const double hx = 0.5 * nx * dx + std::abs(cx);
        const double hy = 0.5 * ny * dy + std::abs(cy);
        return std::hypot(hx, hy);
    }

    friend bool operator==(const ImageGrid&, const ImageGrid&) = default;
};

/// Row-major [ny][nx] image with a unit tag.
struct Image {
    ImageGrid grid;
    std::vector<double> values;
    Unit unit = Unit::HU;

    Image() = default;
    Image(const ImageGrid& g, Unit u, double fill = 0.0) : grid(g), values(g.size(), fill), unit(u) {
        g.validate();
    }
    Image(const ImageGrid& g, Unit u, std::vector<double> v) : grid(g), values(std::move(v)), unit(u) {
        g.validate();
        if (values.size() != g.size())
            throw DataError("Image: value count does not match grid");
    }

    double& operator()(int i, int j) { return values[grid.index(i, j)]; }
    double operator()(int i, int j) const { return values[grid.index(i, j)]; }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v))
                return false;
        return true;
    }
};

struct Mask {
    ImageGrid grid;
    std::vector<std::uint8_t> flags;

    Mask() = default;
    explicit Mask(const ImageGrid& g, bool fill = false) : grid(g), flags(g.size(), fill ? 1 : 0) {}

    bool operator()(int i, int j) const { return flags[grid.index(i, j)] != 0; }
    std::size_t count() const {
        std::size_t n = 0;
        for (auto f : flags)
            n += f ? 1 : 0;
        return n;
    }
};

/**
 * Circular fan-beam trajectory with a flat, equispaced detector.
 *
 * Channels are indexed over the virtual detector (n_det_virtual cells). The
 * physical detector occupies the central n_det of them; the remaining cells
 * carry no measurement.
 */
struct FanBeamGeometry {
    double sdd = 1200.0;
    double sid = 600.0;
    int n_views = 360;
    int n_det = 600;
    int n_det_virtual = 1000;
    double det_spacing = 1.0;
    std::vector<double> angles;

    FanBeamGeometry() = default;

    /// Uniform full scan: angles k * 2pi / n_views.
    static FanBeamGeometry full_scan(double sdd, double sid, int n_views, int n_det, int n_det_virtual,
                                     double det_spacing) {
        FanBeamGeometry g;
        g.sdd = sdd;
        g.sid = sid;
        g.n_views = n_views;
        g.n_det = n_det;
        g.n_det_virtual = n_det_virtual;
        g.det_spacing = det_spacing;
        if (n_views <= 0)
            throw ConfigError("FanBeamGeometry: n_views must be positive");
        g.angles.resize(static_cast<std::size_t>(n_views));
        for (int v = 0; v < n_views; ++v)
            g.angles[static_cast<std::size_t>(v)] = 2.0 * kPi * v / n_views;
        g.validate();
        return g;
    }

    void validate() const {
        if (!(sid > 0.0) || !(sdd > sid))
            throw ConfigError("FanBeamGeometry: require sdd > sid > 0");
        if (n_det <= 0 || n_det_virtual < n_det)
            throw ConfigError("FanBeamGeometry: require 0 < n_det <= n_det_virtual");
        if ((n_det_virtual - n_det) % 2 != 0)
            throw ConfigError("FanBeamGeometry: physical detector must sit centrally (even channel surplus)");
        if (!(det_spacing > 0.0))
            throw ConfigError("FanBeamGeometry: det_spacing must be positive");
        if (n_views <= 0 || angles.size() != static_cast<std::size_t>(n_views))
            throw ConfigError("FanBeamGeometry: angle list does not match n_views");
        for (std::size_t k = 1; k < angles.size(); ++k)
            if (!(angles[k] > angles[k - 1]))
                throw ConfigError("FanBeamGeometry: angles must be strictly increasing");
    }

    int first_measured() const { return (n_det_virtual - n_det) / 2; }
    int last_measured() const { return first_measured() + n_det - 1; }
    bool is_measured(int c) const { return c >= first_measured() && c <= last_measured(); }

    /// Detector coordinate (mm, at the detector plane) of a channel center.
    double channel_offset(int c) const { return (c - 0.5 * (n_det_virtual - 1)) * det_spacing; }

    double angular_step() const { return n_views > 1 ? angles[1] - angles[0] : 2.0 * kPi; }

    Point2 source(int view) const {
        const double b = angles[static_cast<std::size_t>(view)];
        return {sid * std::cos(b), sid * std::sin(b)};
    }

    /// World position of a channel center for a view.
    Point2 detector_point(int view, int c) const {
        const double b = angles[static_cast<std::size_t>(view)];
        const double cb = std::cos(b), sb = std::sin(b);
        const double back = sdd - sid;
        const double s = channel_offset(c);
        return {-back * cb - s * sb, -back * sb + s * cb};
    }

    std::vector<bool> measured_mask() const {
        std::vector<bool> m(static_cast<std::size_t>(n_det_virtual));
        for (int c = 0; c < n_det_virtual; ++c)
            m[static_cast<std::size_t>(c)] = is_measured(c);
        return m;
    }

    /// Radius of the circle seen by every view through the physical (or virtual) detector.
    double fov_radius(bool virtual_detector) const {
        const double half = 0.5 * (virtual_detector ? n_det_virtual : n_det) * det_spacing;
        return sid * std::sin(std::atan(half / sdd));
    }

    friend bool operator==(const FanBeamGeometry&, const FanBeamGeometry&) = default;
};

/// Line integrals [n_views][n_det_virtual] with a per-channel measurement flag.
struct Sinogram {
    FanBeamGeometry geometry;
    std::vector<double> values;
    std::vector<bool> measured_mask;

    Sinogram() = default;
    explicit Sinogram(const FanBeamGeometry& g, double fill = 0.0)
        : geometry(g),
          values(static_cast<std::size_t>(g.n_views) * static_cast<std::size_t>(g.n_det_virtual), fill),
          measured_mask(static_cast<std::size_t>(g.n_det_virtual), true) {}

    int n_views() const { return geometry.n_views; }
    int n_channels() const { return geometry.n_det_virtual; }

    double& at(int v, int c) {
        return values[static_cast<std::size_t>(v) * static_cast<std::size_t>(n_channels()) + static_cast<std::size_t>(c)];
    }
    double at(int v, int c) const {
        return values[static_cast<std::size_t>(v) * static_cast<std::size_t>(n_channels()) + static_cast<std::size_t>(c)];
    }

    bool is_truncated() const {
        for (bool m : measured_mask)
            if (!m)
                return true;
        return false;
    }
};

/// Channel selection used by the masked operators A_m / A_t.
using ChannelMask = std::vector<bool>;

inline ChannelMask all_channels(const FanBeamGeometry& g) {
    return ChannelMask(static_cast<std::size_t>(g.n_det_virtual), true);
}

inline ChannelMask invert(const ChannelMask& m) {
    ChannelMask out(m.size());
    for (std::size_t k = 0; k < m.size(); ++k)
        out[k] = !m[k];
    return out;
}

/// Pixels whose centers lie within the radius covered by the physical or virtual detector.
inline Mask fov_mask(const FanBeamGeometry& geometry, const ImageGrid& grid, bool virtual_detector) {
    const double r = geometry.fov_radius(virtual_detector);
    Mask m(grid);
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
            const Point2 p = grid.world(i, j);
            m.flags[grid.index(i, j)] = std::hypot(p.x, p.y) <= r ? 1 : 0;
        }
    return m;
}

/// Pixels within a given isocentric radius.
inline Mask disk_mask(const ImageGrid& grid, double radius) {
    Mask m(grid);
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
            const Point2 p = grid.world(i, j);
            m.flags[grid.index(i, j)] = std::hypot(p.x, p.y) <= radius ? 1 : 0;
        }
    return m;
}

inline double hu_to_mu_value(double hu) { return kMuWater * (1.0 + hu / 1000.0); }
inline double mu_to_hu_value(double mu) { return 1000.0 * (mu / kMuWater - 1.0); }

inline Image hu_to_mu(const Image& image) {
    if (image.unit != Unit::HU)
        throw DataError("hu_to_mu: input is not in HU");
    Image out(image.grid, Unit::MuPerMm);
    for (std::size_t k = 0; k < image.values.size(); ++k)
        out.values[k] = hu_to_mu_value(image.values[k]);
    return out;
}

inline Image mu_to_hu(const Image& image) {
    if (image.unit != Unit::MuPerMm)
        throw DataError("mu_to_hu: input is not in mu_per_mm");
    Image out(image.grid, Unit::HU);
    for (std::size_t k = 0; k < image.values.size(); ++k)
        out.values[k] = mu_to_hu_value(image.values[k]);
    return out;
}

/// Converts to the requested unit, copying when it already matches.
inline Image to_unit(const Image& image, Unit unit) {
    if (image.unit == unit)
        return image;
    return unit == Unit::HU ? mu_to_hu(image) : hu_to_mu(image);
}

inline void require_same_grid(const ImageGrid& a, const ImageGrid& b, const char* what) {
    if (!(a == b))
        throw DataError(std::string(what) + ": image grids differ");
}

}  // namespace dcr
