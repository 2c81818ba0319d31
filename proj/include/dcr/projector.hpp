#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dcr/core.hpp"
#include "dcr/parallel.hpp"

namespace dcr {

namespace detail {

/**
 * Joseph-style traversal of the ray from `src` to `dst`. The driving axis is
 * the one along which the ray advances fastest in index units; at each pixel
 * line on that axis the ray position is linearly interpolated between the two
 * neighbouring pixels of the other axis. Pixels outside the lattice count as
 * zero. Calls visit(pixel_index, weight_mm) for every nonzero weight.
 *
 * Forward and back projection both go through this function, so the
 * backprojector is the exact transpose of the forward projector.
 */
template <class Visit>
inline void trace_ray(const ImageGrid& grid, Point2 src, Point2 dst, Visit&& visit) {
    const Point2 a = grid.to_index(src);
    const Point2 b = grid.to_index(dst);
    const double du = b.x - a.x;
    const double dv = b.y - a.y;
    const double wx = (dst.x - src.x);
    const double wy = (dst.y - src.y);
    const double len = std::hypot(wx, wy);
    if (len == 0.0)
        return;

    const int nx = grid.nx, ny = grid.ny;
    if (std::abs(du) >= std::abs(dv)) {
        // one step per column: world step length along the ray
        const double step = grid.dx * len / std::abs(wx);
        const double slope = dv / du;
        for (int i = 0; i < nx; ++i) {
            const double v = a.y + (i - a.x) * slope;
            if (v <= -1.0 || v >= ny)
                continue;
            const double fl = std::floor(v);
            const int j0 = static_cast<int>(fl);
            const double frac = v - fl;
            if (j0 >= 0 && frac < 1.0)
                visit(grid.index(i, j0), step * (1.0 - frac));
            if (j0 + 1 < ny && frac > 0.0)
                visit(grid.index(i, j0 + 1), step * frac);
        }
    } else {
        const double step = grid.dy * len / std::abs(wy);
        const double slope = du / dv;
        for (int j = 0; j < ny; ++j) {
            const double u = a.x + (j - a.y) * slope;
            if (u <= -1.0 || u >= nx)
                continue;
            const double fl = std::floor(u);
            const int i0 = static_cast<int>(fl);
            const double frac = u - fl;
            if (i0 >= 0 && frac < 1.0)
                visit(grid.index(i0, j), step * (1.0 - frac));
            if (i0 + 1 < nx && frac > 0.0)
                visit(grid.index(i0 + 1, j), step * frac);
        }
    }
}

inline void check_geometry_vs_grid(const FanBeamGeometry& geometry, const ImageGrid& grid) {
    geometry.validate();
    const double r = grid.bounding_radius();
    if (geometry.sid <= r)
        throw ConfigError("projector: source trajectory passes through the image grid");
    if (geometry.sdd - geometry.sid <= r)
        throw ConfigError("projector: detector plane intersects the image grid");
}

inline void check_channel_mask(const ChannelMask& mask, const FanBeamGeometry& geometry) {
    if (mask.size() != static_cast<std::size_t>(geometry.n_det_virtual))
        throw DataError("projector: channel mask length " + std::to_string(mask.size()) +
                        " does not match " + std::to_string(geometry.n_det_virtual) + " channels");
}

}  // namespace detail

/// Nonzero (pixel, weight) pairs of one system-matrix row.
struct RayPath {
    std::vector<std::size_t> pixels;
    std::vector<double> weights;

    double total_weight() const {
        double s = 0.0;
        for (double w : weights)
            s += w;
        return s;
    }
};

inline RayPath ray_path(const FanBeamGeometry& geometry, const ImageGrid& grid, int view, int channel) {
    RayPath path;
    detail::trace_ray(grid, geometry.source(view), geometry.detector_point(view, channel),
                      [&](std::size_t idx, double w) {
                          path.pixels.push_back(idx);
                          path.weights.push_back(w);
                      });
    return path;
}

/// Line integrals of one view, written to out[c] for selected channels (others untouched).
inline void project_view(const Image& image, const FanBeamGeometry& geometry, int view, const ChannelMask* mask,
                         double* out) {
    const Point2 src = geometry.source(view);
    const double* f = image.values.data();
    for (int c = 0; c < geometry.n_det_virtual; ++c) {
        if (mask && !(*mask)[static_cast<std::size_t>(c)])
            continue;
        double acc = 0.0;
        detail::trace_ray(image.grid, src, geometry.detector_point(view, c),
                          [&](std::size_t idx, double w) { acc += w * f[idx]; });
        out[c] = acc;
    }
}

/**
 * A f on every virtual channel, or on the channels selected by `mask`
 * (unselected channels are zero). The image must be in attenuation units.
 */
inline Sinogram forward_project(const Image& image, const FanBeamGeometry& geometry,
                                const std::optional<ChannelMask>& mask = std::nullopt) {
    if (image.unit != Unit::MuPerMm)
        throw DataError("forward_project: image must be in mu_per_mm");
    detail::check_geometry_vs_grid(geometry, image.grid);
    if (mask)
        detail::check_channel_mask(*mask, geometry);
    Sinogram sino(geometry);
    const ChannelMask* m = mask ? &*mask : nullptr;
    parallel_for(static_cast<std::size_t>(geometry.n_views), [&](std::size_t v) {
        project_view(image, geometry, static_cast<int>(v), m,
                     sino.values.data() + v * static_cast<std::size_t>(geometry.n_det_virtual));
    });
    return sino;
}

/// Accumulates A_v^T y for one view into `out` (raw pixel buffer on `grid`).
inline void backproject_view(const double* row, const FanBeamGeometry& geometry, const ImageGrid& grid, int view,
                             const ChannelMask* mask, double* out) {
    const Point2 src = geometry.source(view);
    for (int c = 0; c < geometry.n_det_virtual; ++c) {
        if (mask && !(*mask)[static_cast<std::size_t>(c)])
            continue;
        const double y = row[c];
        if (y == 0.0)
            continue;
        detail::trace_ray(grid, src, geometry.detector_point(view, c),
                          [&](std::size_t idx, double w) { out[idx] += w * y; });
    }
}

namespace detail {
inline constexpr std::size_t kBackprojectBlocks = 8;
}

/**
 * A^T y restricted to the channels selected by `mask` (all channels when
 * absent). Views are split into a fixed number of blocks whose partial images
 * are summed in block order, so the result does not depend on thread count.
 */
inline Image back_project(const Sinogram& sinogram, const ImageGrid& grid,
                          const std::optional<ChannelMask>& mask = std::nullopt) {
    const FanBeamGeometry& geometry = sinogram.geometry;
    detail::check_geometry_vs_grid(geometry, grid);
    if (mask)
        detail::check_channel_mask(*mask, geometry);
    if (sinogram.values.size() != static_cast<std::size_t>(geometry.n_views) * geometry.n_det_virtual)
        throw DataError("back_project: sinogram shape does not match its geometry");
    const ChannelMask* m = mask ? &*mask : nullptr;

    const std::size_t n_views = static_cast<std::size_t>(geometry.n_views);
    const std::size_t blocks = std::min(detail::kBackprojectBlocks, n_views);
    std::vector<std::vector<double>> partial(blocks, std::vector<double>(grid.size(), 0.0));
    parallel_blocks(n_views, blocks, [&](std::size_t b, std::size_t lo, std::size_t hi) {
        for (std::size_t v = lo; v < hi; ++v)
            backproject_view(sinogram.values.data() + v * static_cast<std::size_t>(geometry.n_det_virtual),
                             geometry, grid, static_cast<int>(v), m, partial[b].data());
    });
    Image out(grid, Unit::MuPerMm, 0.0);
    for (const auto& p : partial)
        for (std::size_t k = 0; k < p.size(); ++k)
            out.values[k] += p[k];
    return out;
}

/// A 1: sum of weights along every ray (zero on unselected channels).
inline Sinogram row_sums(const FanBeamGeometry& geometry, const ImageGrid& grid,
                         const std::optional<ChannelMask>& mask = std::nullopt) {
    return forward_project(Image(grid, Unit::MuPerMm, 1.0), geometry, mask);
}

/// A^T 1 over the selected channels.
inline Image col_sums(const FanBeamGeometry& geometry, const ImageGrid& grid,
                      const std::optional<ChannelMask>& mask = std::nullopt) {
    return back_project(Sinogram(geometry, 1.0), grid, mask);
}

}  // namespace dcr
