#pragma once

#include <cmath>
#include <vector>

#include "dcr/core.hpp"
#include "dcr/parallel.hpp"

namespace dcr {

/// Ram-Lak taps h[k], k = -(n-1) .. n-1, stored at taps[k + n - 1].
struct RampKernel {
    std::vector<double> taps;
    double det_spacing = 1.0;

    int half_length() const { return static_cast<int>(taps.size() / 2); }
    double operator[](int k) const { return taps[static_cast<std::size_t>(k + half_length())]; }
};

inline RampKernel ramp_kernel(int n, double ds) {
    if (n <= 0)
        throw ConfigError("ramp_kernel: n must be positive");
    if (!(ds > 0.0))
        throw ConfigError("ramp_kernel: spacing must be positive");
    RampKernel h;
    h.det_spacing = ds;
    h.taps.assign(static_cast<std::size_t>(2 * n - 1), 0.0);
    for (int k = -(n - 1); k <= n - 1; ++k) {
        double v = 0.0;
        if (k == 0)
            v = 1.0 / (4.0 * ds * ds);
        else if (k % 2 != 0)
            v = -1.0 / ((kPi * k * ds) * (kPi * k * ds));
        h.taps[static_cast<std::size_t>(k + n - 1)] = v;
    }
    return h;
}

/**
 * Cosine-weighted, ramp-filtered projections. The ramp is applied on the
 * detector rescaled to the isocenter (spacing ds * sid / sdd) and includes
 * the quadrature factor of that spacing.
 */
inline std::vector<double> filter_projections(const Sinogram& sinogram) {
    const FanBeamGeometry& g = sinogram.geometry;
    const int n = g.n_det_virtual;
    const double ds_iso = g.det_spacing * g.sid / g.sdd;
    const RampKernel h = ramp_kernel(n, ds_iso);

    std::vector<double> cosw(static_cast<std::size_t>(n));
    for (int c = 0; c < n; ++c) {
        const double s = g.channel_offset(c);
        cosw[static_cast<std::size_t>(c)] = g.sdd / std::sqrt(g.sdd * g.sdd + s * s);
    }

    std::vector<double> out(sinogram.values.size(), 0.0);
    parallel_for(static_cast<std::size_t>(g.n_views), [&](std::size_t v) {
        std::vector<double> q(static_cast<std::size_t>(n));
        for (int c = 0; c < n; ++c)
            q[static_cast<std::size_t>(c)] = sinogram.at(static_cast<int>(v), c) * cosw[static_cast<std::size_t>(c)];
        double* row = out.data() + v * static_cast<std::size_t>(n);
        for (int c = 0; c < n; ++c) {
            // even taps other than 0 vanish; walk only k = 0 and odd k
            double acc = q[static_cast<std::size_t>(c)] * h[0];
            for (int k = 1; k < n; k += 2) {
                double pair = 0.0;
                if (c - k >= 0)
                    pair += q[static_cast<std::size_t>(c - k)];
                if (c + k < n)
                    pair += q[static_cast<std::size_t>(c + k)];
                acc += pair * h[k];
            }
            row[c] = acc * ds_iso;
        }
    });
    return out;
}

/// Flat-detector fan-beam FBP returning attenuation (1/mm).
inline Image fbp_reconstruct_mu(const Sinogram& sinogram, const ImageGrid& grid) {
    const FanBeamGeometry& g = sinogram.geometry;
    g.validate();
    grid.validate();
    if (sinogram.values.size() != static_cast<std::size_t>(g.n_views) * g.n_det_virtual)
        throw DataError("fbp_reconstruct: sinogram shape does not match its geometry");
    if (grid.bounding_radius() >= g.sid)
        throw DataError("fbp_reconstruct: grid extends past the source trajectory");
    for (double p : sinogram.values)
        if (!std::isfinite(p))
            throw DataError("fbp_reconstruct: non-finite sinogram value");

    const std::vector<double> filtered = filter_projections(sinogram);
    const int n = g.n_det_virtual;
    const double ds_iso = g.det_spacing * g.sid / g.sdd;
    const double center = 0.5 * (n - 1);
    const double dbeta = g.angular_step();
    const double sid2 = g.sid * g.sid;

    std::vector<double> cosb(static_cast<std::size_t>(g.n_views)), sinb(static_cast<std::size_t>(g.n_views));
    for (int v = 0; v < g.n_views; ++v) {
        cosb[static_cast<std::size_t>(v)] = std::cos(g.angles[static_cast<std::size_t>(v)]);
        sinb[static_cast<std::size_t>(v)] = std::sin(g.angles[static_cast<std::size_t>(v)]);
    }

    Image out(grid, Unit::MuPerMm, 0.0);
    parallel_for(static_cast<std::size_t>(grid.ny), [&](std::size_t jj) {
        const int j = static_cast<int>(jj);
        for (int i = 0; i < grid.nx; ++i) {
            const Point2 p = grid.world(i, j);
            double acc = 0.0;
            for (int v = 0; v < g.n_views; ++v) {
                const double cb = cosb[static_cast<std::size_t>(v)], sb = sinb[static_cast<std::size_t>(v)];
                const double u = g.sid - (p.x * cb + p.y * sb);  // source-to-pixel depth
                const double t = -p.x * sb + p.y * cb;            // lateral offset
                const double s_iso = g.sid * t / u;
                const double idx = s_iso / ds_iso + center;
                const double fl = std::floor(idx);
                const int c0 = static_cast<int>(fl);
                if (c0 < -1 || c0 >= n)
                    continue;
                const double frac = idx - fl;
                const double* row = filtered.data() + static_cast<std::size_t>(v) * static_cast<std::size_t>(n);
                double val = 0.0;
                if (c0 >= 0)
                    val += (1.0 - frac) * row[c0];
                if (c0 + 1 < n)
                    val += frac * row[c0 + 1];
                acc += val * sid2 / (u * u);
            }
            // full scan covers every ray twice
            out(i, j) = 0.5 * dbeta * acc;
        }
    });
    return out;
}

inline Image fbp_reconstruct(const Sinogram& sinogram, const ImageGrid& grid) {
    return mu_to_hu(fbp_reconstruct_mu(sinogram, grid));
}

}  // namespace dcr
