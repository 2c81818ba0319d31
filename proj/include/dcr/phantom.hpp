#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <json.hpp>

#include "dcr/core.hpp"
#include "dcr/parallel.hpp"

namespace dcr {

struct Ellipse {
    double cx = 0.0;
    double cy = 0.0;
    double a = 1.0;  // semi-axis along the rotated x axis, mm
    double b = 1.0;
    double rotation = 0.0;  // rad, counter-clockwise
    double delta_hu = 0.0;

    /// <= 1 inside the ellipse.
    double implicit(Point2 p) const {
        const double c = std::cos(rotation), s = std::sin(rotation);
        const double x = p.x - cx, y = p.y - cy;
        const double xr = c * x + s * y;
        const double yr = -s * x + c * y;
        return (xr * xr) / (a * a) + (yr * yr) / (b * b);
    }
    bool contains(Point2 p) const { return implicit(p) <= 1.0; }

    /// Length (mm) of the intersection of the line src + t (dst - src) with the ellipse.
    double chord(Point2 src, Point2 dst) const {
        const double c = std::cos(rotation), s = std::sin(rotation);
        const double dx = dst.x - src.x, dy = dst.y - src.y;
        const double len = std::hypot(dx, dy);
        const double ux = dx / len, uy = dy / len;
        const double px = src.x - cx, py = src.y - cy;
        // ellipse frame, scaled to the unit circle
        const double p0 = (c * px + s * py) / a;
        const double p1 = (-s * px + c * py) / b;
        const double d0 = (c * ux + s * uy) / a;
        const double d1 = (-s * ux + c * uy) / b;
        const double qa = d0 * d0 + d1 * d1;
        const double qb = 2.0 * (p0 * d0 + p1 * d1);
        const double qc = p0 * p0 + p1 * p1 - 1.0;
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc <= 0.0)
            return 0.0;
        return std::sqrt(disc) / qa;
    }

    double extent() const { return std::hypot(cx, cy) + std::max(a, b); }

    friend bool operator==(const Ellipse&, const Ellipse&) = default;
};

struct EllipsePhantom {
    static constexpr double kBackgroundHU = -1000.0;
    std::vector<Ellipse> ellipses;

    double hu_at(Point2 p) const {
        double hu = kBackgroundHU;
        for (const auto& e : ellipses)
            if (e.contains(p))
                hu += e.delta_hu;
        return hu;
    }

    friend bool operator==(const EllipsePhantom&, const EllipsePhantom&) = default;
};

inline void to_json(nlohmann::json& j, const Ellipse& e) {
    j = nlohmann::json{{"cx", e.cx}, {"cy", e.cy}, {"a", e.a}, {"b", e.b}, {"rotation", e.rotation},
                       {"delta_hu", e.delta_hu}};
}

inline void from_json(const nlohmann::json& j, Ellipse& e) {
    j.at("cx").get_to(e.cx);
    j.at("cy").get_to(e.cy);
    j.at("a").get_to(e.a);
    j.at("b").get_to(e.b);
    j.at("rotation").get_to(e.rotation);
    j.at("delta_hu").get_to(e.delta_hu);
    if (!(e.a > 0.0) || !(e.b > 0.0))
        throw DataError("ellipse semi-axes must be positive");
}

inline void to_json(nlohmann::json& j, const EllipsePhantom& p) {
    j = nlohmann::json{{"background_hu", EllipsePhantom::kBackgroundHU}, {"ellipses", p.ellipses}};
}

inline void from_json(const nlohmann::json& j, EllipsePhantom& p) {
    if (j.contains("background_hu") && j.at("background_hu").get<double>() != EllipsePhantom::kBackgroundHU)
        throw DataError("phantom background must be -1000 HU");
    p.ellipses = j.at("ellipses").get<std::vector<Ellipse>>();
}

/// Point-sampled HU image: each pixel takes the analytic value at its center.
inline Image rasterize(const EllipsePhantom& phantom, const ImageGrid& grid) {
    Image img(grid, Unit::HU, EllipsePhantom::kBackgroundHU);
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i)
            img(i, j) = phantom.hu_at(grid.world(i, j));
    return img;
}

/// Closed-form line integrals (mu * chord length) on every virtual channel.
inline Sinogram analytic_sinogram(const EllipsePhantom& phantom, const FanBeamGeometry& geometry) {
    geometry.validate();
    Sinogram sino(geometry);
    parallel_for(static_cast<std::size_t>(geometry.n_views), [&](std::size_t vv) {
        const int v = static_cast<int>(vv);
        const Point2 src = geometry.source(v);
        for (int c = 0; c < geometry.n_det_virtual; ++c) {
            const Point2 dst = geometry.detector_point(v, c);
            double acc = 0.0;
            for (const auto& e : phantom.ellipses)
                acc += kMuWater * e.delta_hu / 1000.0 * e.chord(src, dst);
            sino.at(v, c) = acc;
        }
    });
    return sino;
}

/// Spatial limits used when drawing random phantoms.
struct PhantomBounds {
    double r_fov = 145.521;     // physical detector FOV radius, mm
    double half_width = 160.0;  // half side of the reconstruction grid, mm
    double r_ext = 230.769;     // virtual detector FOV radius, mm

    static PhantomBounds from(const FanBeamGeometry& g, const ImageGrid& grid) {
        return {g.fov_radius(false), 0.5 * std::min(grid.nx * grid.dx, grid.ny * grid.dy), g.fov_radius(true)};
    }
};

namespace detail {

inline bool inside_ellipse(const Ellipse& inner, const Ellipse& outer, double margin) {
    constexpr int kSamples = 72;
    const double c = std::cos(inner.rotation), s = std::sin(inner.rotation);
    for (int k = 0; k < kSamples; ++k) {
        const double t = 2.0 * kPi * k / kSamples;
        const double x = inner.a * std::cos(t), y = inner.b * std::sin(t);
        const Point2 p{inner.cx + c * x - s * y, inner.cy + s * x + c * y};
        if (outer.implicit(p) > margin)
            return false;
    }
    return true;
}

inline bool disjoint(const Ellipse& e, const Ellipse& other, double margin) {
    constexpr int kSamples = 72;
    const double c = std::cos(e.rotation), s = std::sin(e.rotation);
    for (int k = 0; k < kSamples; ++k) {
        const double t = 2.0 * kPi * k / kSamples;
        for (double scale : {1.0, 0.5, 0.0}) {
            const double x = scale * e.a * std::cos(t), y = scale * e.b * std::sin(t);
            const Point2 p{e.cx + c * x - s * y, e.cy + s * x + c * y};
            if (other.implicit(p) < margin)
                return false;
        }
    }
    return true;
}

inline double max_abs_coord(const Ellipse& e) {
    // axis-aligned half extents of a rotated ellipse
    const double c = std::cos(e.rotation), s = std::sin(e.rotation);
    const double hx = std::sqrt(e.a * e.a * c * c + e.b * e.b * s * s);
    const double hy = std::sqrt(e.a * e.a * s * s + e.b * e.b * c * c);
    return std::max(std::abs(e.cx) + hx, std::abs(e.cy) + hy);
}

}  // namespace detail

/**
 * Draws a torso-like phantom: a water body, 3-8 interior features (lung,
 * soft tissue, bone) and, when truncating, a body wider than the physical
 * FOV plus two arms that reach outside it. Everything stays inside the
 * grid square and the virtual-detector FOV. Deterministic in the seed.
 */
inline EllipsePhantom sample_phantom(std::uint64_t seed, bool truncating, const PhantomBounds& bounds = {}) {
    std::mt19937_64 rng(seed);
    auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    const double limit = std::min(bounds.half_width - 3.0, bounds.r_ext - 3.0);

    EllipsePhantom ph;
    Ellipse body;
    body.delta_hu = 1000.0 + uni(-40.0, 40.0);
    body.cx = uni(-4.0, 4.0);
    body.cy = uni(-6.0, 6.0);
    body.rotation = uni(-0.08, 0.08);
    if (truncating) {
        body.a = std::min(uni(1.04, 1.08) * bounds.r_fov, limit - std::abs(body.cx) - 2.0);
        body.b = uni(0.84, 0.94) * bounds.r_fov;
    } else {
        body.a = uni(0.72, 0.86) * bounds.r_fov;
        body.b = uni(0.55, 0.70) * bounds.r_fov;
    }
    ph.ellipses.push_back(body);

    const int n_inner = std::uniform_int_distribution<int>(3, 8)(rng);
    for (int k = 0; k < n_inner; ++k) {
        for (int attempt = 0; attempt < 200; ++attempt) {
            Ellipse e;
            const int kind = std::uniform_int_distribution<int>(0, 2)(rng);
            if (kind == 0) {  // lung
                e.delta_hu = uni(-900.0, -700.0);
                e.a = uni(20.0, 45.0);
                e.b = uni(25.0, 55.0);
            } else if (kind == 1) {  // soft tissue
                e.delta_hu = uni(-100.0, 100.0);
                e.a = uni(8.0, 30.0);
                e.b = uni(8.0, 30.0);
            } else {  // bone
                e.delta_hu = uni(300.0, 1200.0);
                e.a = uni(4.0, 15.0);
                e.b = uni(4.0, 15.0);
            }
            e.rotation = uni(0.0, kPi);
            e.cx = body.cx + uni(-0.75, 0.75) * body.a;
            e.cy = body.cy + uni(-0.75, 0.75) * body.b;
            if (!detail::inside_ellipse(e, body, 0.85))
                continue;
            if (!truncating && e.extent() > bounds.r_fov)
                continue;
            ph.ellipses.push_back(e);
            break;
        }
    }

    if (truncating) {
        for (int side = 0; side < 2; ++side) {
            const double sign = side == 0 ? 1.0 : -1.0;
            for (int attempt = 0; attempt < 500; ++attempt) {
                Ellipse arm;
                arm.delta_hu = 1000.0 + uni(-40.0, 60.0);
                arm.a = uni(16.0, 24.0);
                arm.b = uni(20.0, 30.0);
                arm.rotation = uni(0.0, kPi);
                const double theta = uni(0.45, 0.85);
                const double dist = uni(0.98, 1.25) * bounds.r_fov;
                arm.cx = sign * dist * std::cos(theta);
                arm.cy = dist * std::sin(theta) * (side == 0 ? 1.0 : -1.0);
                if (detail::max_abs_coord(arm) > limit || arm.extent() > bounds.r_ext - 3.0)
                    continue;
                if (arm.extent() <= bounds.r_fov + 5.0)
                    continue;
                if (!detail::disjoint(arm, body, 1.08))
                    continue;
                ph.ellipses.push_back(arm);
                break;
            }
        }
    }
    return ph;
}

}  // namespace dcr
