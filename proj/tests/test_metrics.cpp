#include <catch_amalgamated.hpp>

#include "support.hpp"

using Catch::Approx;
using namespace dcr;

TEST_CASE("RMSE") {
    const ImageGrid g(10, 10, 1.0, 1.0);
    const Mask all(g, true);
    const Image a = testing::random_image(g, Unit::HU, 1, -100.0, 100.0);
    CHECK(rmse(a, a, all) == 0.0);
    Image b = a;
    for (double& v : b.values)
        v += 10.0;
    CHECK(rmse(a, b, all) == Approx(10.0));
    Image check(g, Unit::HU, 0.0), zero(g, Unit::HU, 0.0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            check(i, j) = (i + j) % 2 ? 40.0 : -40.0;
    CHECK(rmse(check, zero, all) == Approx(40.0));
    CHECK_THROWS_AS(rmse(a, b, Mask(g, false)), DataError);
    CHECK_THROWS_AS(rmse(a, Image(ImageGrid(5, 5, 1.0, 1.0), Unit::HU), Mask(g, true)), DataError);
}

TEST_CASE("body mask") {
    const ImageGrid g(64, 64, 2.0, 2.0);
    CHECK_THROWS_AS(body_mask(Image(g, Unit::HU, -1000.0)), DataError);

    EllipsePhantom ph = testing::water_circle(40.0);
    ph.ellipses.push_back({10.0, 0.0, 10.0, 8.0, 0.0, -1000.0});  // air pocket inside
    ph.ellipses.push_back({-56.0, -56.0, 4.0, 4.0, 0.0, 1000.0});  // detached speck
    const Mask m = body_mask(rasterize(ph, g));
    const Mask disk = disk_mask(g, 40.0);
    std::size_t differ = 0;
    for (std::size_t k = 0; k < g.size(); ++k)
        differ += m.flags[k] != disk.flags[k] ? 1 : 0;
    CHECK(differ == 0);
    const Point2 pocket = g.to_index({10.0, 0.0});
    CHECK(m(static_cast<int>(pocket.x), static_cast<int>(pocket.y)));

    const FanBeamGeometry geo = testing::scanner();
    const ImageGrid grid(256, 256, 1.25, 1.25);
    const Mask ext = fov_mask(geo, grid, true);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Mask b = body_mask(rasterize(sample_phantom(seed, true, PhantomBounds::from(geo, grid)), grid));
        for (std::size_t k = 0; k < b.flags.size(); ++k)
            if (b.flags[k])
                REQUIRE(ext.flags[k]);
    }
}

TEST_CASE("SSIM") {
    const ImageGrid g(48, 48, 1.0, 1.0);
    const Image a = rasterize(testing::water_circle(15.0), g);
    CHECK(ssim(a, a) == Approx(1.0));
    Image shifted = a;
    for (double& v : shifted.values)
        v += 1000.0;
    CHECK(ssim(a, shifted) < 1.0);

    const Image n1 = testing::random_image(g, Unit::HU, 1, -500.0, 500.0);
    const Image n2 = testing::random_image(g, Unit::HU, 2, -500.0, 500.0);
    CHECK(std::abs(ssim(n1, n2)) < 0.1);
    CHECK(ssim(a, n1) < ssim(a, a));
}
