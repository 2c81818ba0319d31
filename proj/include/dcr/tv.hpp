#pragma once

#include <cmath>
#include <vector>

#include "dcr/core.hpp"

namespace dcr {

/// Forward differences (Dx f, Dy f), zero on the last column / row.
struct GradientField {
    ImageGrid grid;
    std::vector<double> dx;
    std::vector<double> dy;

    double magnitude(std::size_t k) const { return std::hypot(dx[k], dy[k]); }
};

struct TVWeights {
    ImageGrid grid;
    std::vector<double> w;
};

inline GradientField gradient(const Image& f) {
    const ImageGrid& g = f.grid;
    GradientField d{g, std::vector<double>(g.size(), 0.0), std::vector<double>(g.size(), 0.0)};
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const std::size_t k = g.index(i, j);
            if (i + 1 < g.nx)
                d.dx[k] = f.values[k + 1] - f.values[k];
            if (j + 1 < g.ny)
                d.dy[k] = f.values[k + static_cast<std::size_t>(g.nx)] - f.values[k];
        }
    return d;
}

/// w = 1 / (|D f_prev| + eps), eps in the image's units (HU).
inline TVWeights tv_weights(const Image& prev, double epsilon) {
    if (!(epsilon > 0.0))
        throw ConfigError("tv_weights: epsilon must be positive");
    const GradientField d = gradient(prev);
    TVWeights w{prev.grid, std::vector<double>(prev.grid.size())};
    for (std::size_t k = 0; k < w.w.size(); ++k)
        w.w[k] = 1.0 / (d.magnitude(k) + epsilon);
    return w;
}

inline void check_weights(const Image& f, const TVWeights& w, const char* what) {
    if (!(f.grid == w.grid) || w.w.size() != f.values.size())
        throw DataError(std::string(what) + ": weight shape does not match image");
}

/// sum w |D f|.
inline double wtv_norm(const Image& f, const TVWeights& w) {
    check_weights(f, w, "wtv_norm");
    const GradientField d = gradient(f);
    double s = 0.0;
    for (std::size_t k = 0; k < w.w.size(); ++k)
        s += w.w[k] * d.magnitude(k);
    return s;
}

/// Unweighted isotropic total variation.
inline double total_variation(const Image& f) {
    const GradientField d = gradient(f);
    double s = 0.0;
    for (std::size_t k = 0; k < d.dx.size(); ++k)
        s += d.magnitude(k);
    return s;
}

/// Smoothed objective sum w sqrt(|D f|^2 + delta^2).
inline double wtv_smoothed(const Image& f, const TVWeights& w, double delta) {
    check_weights(f, w, "wtv_smoothed");
    const GradientField d = gradient(f);
    const double d2 = delta * delta;
    double s = 0.0;
    for (std::size_t k = 0; k < w.w.size(); ++k)
        s += w.w[k] * std::sqrt(d.dx[k] * d.dx[k] + d.dy[k] * d.dy[k] + d2);
    return s;
}

/// Gradient of wtv_smoothed with respect to the pixel values.
inline Image wtv_gradient(const Image& f, const TVWeights& w, double delta) {
    check_weights(f, w, "wtv_gradient");
    if (!(delta > 0.0))
        throw ConfigError("wtv_gradient: smoothing delta must be positive");
    const ImageGrid& g = f.grid;
    const GradientField d = gradient(f);
    const double d2 = delta * delta;
    Image out(g, f.unit, 0.0);
    const auto nx = static_cast<std::size_t>(g.nx);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const std::size_t k = g.index(i, j);
            if (w.w[k] == 0.0)
                continue;
            const double scale = w.w[k] / std::sqrt(d.dx[k] * d.dx[k] + d.dy[k] * d.dy[k] + d2);
            const double gx = scale * d.dx[k];
            const double gy = scale * d.dy[k];
            if (i + 1 < g.nx) {
                out.values[k + 1] += gx;
                out.values[k] -= gx;
            }
            if (j + 1 < g.ny) {
                out.values[k + nx] += gy;
                out.values[k] -= gy;
            }
        }
    return out;
}

}  // namespace dcr
