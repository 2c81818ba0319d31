#include <catch_amalgamated.hpp>

#include "support.hpp"

using Catch::Approx;
using namespace dcr;

TEST_CASE("Ram-Lak taps") {
    const RampKernel h = ramp_kernel(8, 1.0);
    CHECK(h[0] == Approx(0.25));
    CHECK(h[1] == Approx(-1.0 / (kPi * kPi)));
    CHECK(h[1] == Approx(-0.101321).margin(1e-6));
    CHECK(h[-1] == h[1]);
    CHECK(h[2] == 0.0);
    CHECK(h[3] == Approx(-1.0 / (9.0 * kPi * kPi)));
    CHECK(ramp_kernel(8, 2.0)[0] == Approx(0.0625));
    CHECK_THROWS_AS(ramp_kernel(0, 1.0), ConfigError);
}

TEST_CASE("zero sinogram reconstructs to air") {
    const ImageGrid grid(32, 32, 4.0, 4.0);
    const Image f = fbp_reconstruct(Sinogram(testing::scanner(36), 0.0), grid);
    for (double v : f.values)
        CHECK(v == Approx(-1000.0));
}

TEST_CASE("FBP of an untruncated water circle") {
    const FanBeamGeometry g = FanBeamGeometry::full_scan(1200.0, 600.0, 360, 1000, 1000, 1.0);
    const ImageGrid grid(256, 256, 1.25, 1.25);
    const auto circle = testing::water_circle(50.0);
    const Image f = fbp_reconstruct(analytic_sinogram(circle, g), grid);
    const Image ref = rasterize(circle, grid);
    // interior of the field, away from the circle edge
    const Mask inner = disk_mask(grid, 0.8 * testing::scanner().fov_radius(false));
    CHECK(rmse(f, ref, inner) < 25.0);
    CHECK(f(128, 128) == Approx(0.0).margin(15.0));
}

TEST_CASE("FBP is linear and follows shifted objects") {
    const FanBeamGeometry g = FanBeamGeometry::full_scan(1200.0, 600.0, 180, 1000, 1000, 1.0);
    const ImageGrid grid(96, 96, 2.5, 2.5);
    const Sinogram a = analytic_sinogram(testing::water_circle(30.0, -20.0, 10.0), g);
    const Sinogram b = analytic_sinogram(testing::water_circle(20.0, 40.0, -30.0), g);
    Sinogram sum = a;
    for (std::size_t k = 0; k < sum.values.size(); ++k)
        sum.values[k] += b.values[k];
    const Image fa = fbp_reconstruct_mu(a, grid), fb = fbp_reconstruct_mu(b, grid), fs = fbp_reconstruct_mu(sum, grid);
    for (std::size_t k = 0; k < fs.values.size(); ++k)
        CHECK(fs.values[k] == Approx(fa.values[k] + fb.values[k]).margin(1e-12));

    const auto moved = testing::water_circle(30.0, 5.0, 10.0);
    const Image shifted = fbp_reconstruct(analytic_sinogram(moved, g), grid);
    const Image original = mu_to_hu(fa);
    // interior values follow the 10-pixel shift; edge errors stay comparable
    double worst = 0.0;
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i + 10 < grid.nx; ++i) {
            const Point2 p = grid.world(i, j);
            if (std::hypot(p.x + 20.0, p.y - 10.0) < 25.0)
                worst = std::max(worst, std::abs(shifted(i + 10, j) - original(i, j)));
        }
    CHECK(worst < 10.0);
    const Mask all(grid, true);
    const double e0 = rmse(original, rasterize(testing::water_circle(30.0, -20.0, 10.0), grid), all);
    const double e1 = rmse(shifted, rasterize(moved, grid), all);
    CHECK(std::abs(e1 - e0) < 0.2 * e0);
}

TEST_CASE("truncated FBP shows cupping in the outer field") {
    const FanBeamGeometry g = testing::scanner(360);
    const ImageGrid grid(256, 256, 1.25, 1.25);
    const EllipsePhantom ph = sample_phantom(1000, true, PhantomBounds::from(g, grid));
    const Image f = fbp_reconstruct(truncate(analytic_sinogram(ph, g)), grid);
    const Image ref = rasterize(ph, grid);
    const double r = g.fov_radius(false);
    double excess = 0.0;
    int n = 0;
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
            const Point2 p = grid.world(i, j);
            const double rr = std::hypot(p.x, p.y);
            if (rr > 0.9 * r && rr < r) {
                excess += f(i, j) - ref(i, j);
                ++n;
            }
        }
    CHECK(excess / n > 100.0);
}
