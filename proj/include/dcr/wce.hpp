#pragma once

#include <cmath>
#include <optional>

#include "dcr/core.hpp"
#include "dcr/fbp.hpp"
#include "dcr/parallel.hpp"

namespace dcr {

enum class Side { Left, Right };

/**
 * Water cylinder 2 mu_w sqrt(R^2 - (t - center)^2) in the outward coordinate
 * t (mm, t = 0 at the outermost measured channel).
 */
struct CylinderFit {
    double radius = 0.0;
    double center = 0.0;
    Side side = Side::Left;

    double profile(double t) const {
        const double arg = radius * radius - (t - center) * (t - center);
        return arg > 0.0 ? 2.0 * kMuWater * std::sqrt(arg) : 0.0;
    }
};

/// Matches value and outward slope at the truncation edge.
inline std::optional<CylinderFit> fit_cylinder(double edge_value, double edge_slope, Side side) {
    if (!(edge_value > 0.0))
        return std::nullopt;
    const double half_chord = edge_value / (2.0 * kMuWater);
    CylinderFit fit;
    fit.side = side;
    fit.center = edge_slope * edge_value / (4.0 * kMuWater * kMuWater);
    fit.radius = std::hypot(half_chord, fit.center);
    return fit;
}

namespace detail {

inline constexpr int kWceSlopeChannels = 5;
inline constexpr int kWceTaperChannels = 20;

/// Least-squares slope of the last few measured samples vs outward distance.
inline double edge_slope(const double* row, int edge, int inward, double ds, int count) {
    double st = 0.0, sp = 0.0, stt = 0.0, stp = 0.0;
    for (int k = 0; k < count; ++k) {
        const double t = -k * ds;
        const double p = row[edge + k * inward];
        st += t;
        sp += p;
        stt += t * t;
        stp += t * p;
    }
    const double n = count;
    const double den = n * stt - st * st;
    return den == 0.0 ? 0.0 : (n * stp - st * sp) / den;
}

}  // namespace detail

/**
 * Water cylinder extrapolation onto the unmeasured channels of each view.
 * Measured channels and the measurement mask are left untouched.
 */
inline Sinogram wce_extrapolate(const Sinogram& sinogram) {
    Sinogram out = sinogram;
    const FanBeamGeometry& g = sinogram.geometry;
    const int n = g.n_det_virtual;
    int first = -1, last = -1;
    for (int c = 0; c < n; ++c)
        if (sinogram.measured_mask[static_cast<std::size_t>(c)]) {
            if (first < 0)
                first = c;
            last = c;
        }
    if (first < 0)
        throw DataError("wce_extrapolate: no measured channels");
    for (int c = first; c <= last; ++c)
        if (!sinogram.measured_mask[static_cast<std::size_t>(c)])
            throw DataError("wce_extrapolate: measured channels must be contiguous");
    if (first == 0 && last == n - 1)
        return out;

    const double ds = g.det_spacing;
    const int slope_n = std::min(detail::kWceSlopeChannels, last - first + 1);
    parallel_for(static_cast<std::size_t>(g.n_views), [&](std::size_t vv) {
        const double* in = sinogram.values.data() + vv * static_cast<std::size_t>(n);
        double* row = out.values.data() + vv * static_cast<std::size_t>(n);
        for (Side side : {Side::Left, Side::Right}) {
            const int edge = side == Side::Left ? first : last;
            const int outward = side == Side::Left ? -1 : 1;
            const int n_fill = side == Side::Left ? first : n - 1 - last;
            if (n_fill == 0)
                continue;
            const auto fit = fit_cylinder(in[edge], detail::edge_slope(in, edge, -outward, ds, slope_n), side);
            for (int k = 1; k <= n_fill; ++k)
                row[edge + outward * k] = fit ? fit->profile(k * ds) : 0.0;
            // cylinder still nonzero at the virtual edge: cosine roll-off
            if (fit && fit->profile(n_fill * ds) > 0.0) {
                const int taper = std::min(detail::kWceTaperChannels, n_fill);
                for (int k = 0; k < taper; ++k) {
                    const int c = side == Side::Left ? k : n - 1 - k;
                    row[c] *= 0.5 * (1.0 - std::cos(kPi * k / taper));
                }
            }
        }
    });
    return out;
}

inline Image reconstruct_wce(const Sinogram& sinogram, const ImageGrid& grid) {
    return fbp_reconstruct(wce_extrapolate(sinogram), grid);
}

}  // namespace dcr
