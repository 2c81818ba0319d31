#pragma once

#include <random>

#include "dcr/dcr.hpp"
#include "dcr/io.hpp"
#include "dcr/pipeline.hpp"

namespace testing {

/// Table-1 scanner.
inline dcr::FanBeamGeometry scanner(int n_views = 360) {
    return dcr::FanBeamGeometry::full_scan(1200.0, 600.0, n_views, 600, 1000, 1.0);
}

/// Small fan beam covering a 32x32 grid of 1 mm pixels; 48 virtual channels, 32 measured.
inline dcr::FanBeamGeometry tiny_scanner(int n_views = 24) {
    return dcr::FanBeamGeometry::full_scan(200.0, 100.0, n_views, 32, 48, 2.0);
}

inline dcr::Image random_image(const dcr::ImageGrid& g, dcr::Unit unit, std::uint64_t seed, double lo = 0.0,
                               double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(lo, hi);
    dcr::Image img(g, unit);
    for (double& v : img.values)
        v = uni(rng);
    return img;
}

inline dcr::EllipsePhantom water_circle(double radius, double cx = 0.0, double cy = 0.0) {
    dcr::EllipsePhantom p;
    p.ellipses.push_back({cx, cy, radius, radius, 0.0, 1000.0});
    return p;
}

}  // namespace testing
