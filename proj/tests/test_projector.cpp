#include <catch_amalgamated.hpp>

#include "support.hpp"

using Catch::Approx;
using namespace dcr;

namespace {

/// Dense system matrix [rays][pixels] assembled by projecting unit basis images.
std::vector<std::vector<double>> dense_matrix(const FanBeamGeometry& g, const ImageGrid& grid) {
    const std::size_t rays = static_cast<std::size_t>(g.n_views) * g.n_det_virtual;
    std::vector<std::vector<double>> a(rays, std::vector<double>(grid.size(), 0.0));
    Image basis(grid, Unit::MuPerMm, 0.0);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        basis.values[k] = 1.0;
        const Sinogram col = forward_project(basis, g);
        for (std::size_t r = 0; r < rays; ++r)
            a[r][k] = col.values[r];
        basis.values[k] = 0.0;
    }
    return a;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        s += a[k] * b[k];
    return s;
}

}  // namespace

TEST_CASE("back projection is the transpose of the dense forward operator") {
    const FanBeamGeometry g = testing::tiny_scanner(24);
    const ImageGrid grid(32, 32, 1.0, 1.0);
    const auto a = dense_matrix(g, grid);

    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const Image x = testing::random_image(grid, Unit::MuPerMm, 100 + seed, -1.0, 1.0);
        Sinogram y(g);
        std::mt19937_64 rng(200 + seed);
        std::uniform_real_distribution<double> uni(-1.0, 1.0);
        for (double& v : y.values)
            v = uni(rng);

        const Image aty = back_project(y, grid);
        std::vector<double> ref(grid.size(), 0.0);
        for (std::size_t r = 0; r < a.size(); ++r)
            for (std::size_t k = 0; k < grid.size(); ++k)
                ref[k] += a[r][k] * y.values[r];
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < ref.size(); ++k) {
            num += (aty.values[k] - ref[k]) * (aty.values[k] - ref[k]);
            den += ref[k] * ref[k];
        }
        CHECK(std::sqrt(num / den) < 1e-10);

        const double lhs = dot(forward_project(x, g).values, y.values);
        const double rhs = dot(x.values, aty.values);
        CHECK(std::abs(lhs - rhs) / std::abs(lhs) < 1e-10);
    }
}

TEST_CASE("forward projection is linear") {
    const FanBeamGeometry g = testing::tiny_scanner(12);
    const ImageGrid grid(32, 32, 1.0, 1.0);
    for (double v : forward_project(Image(grid, Unit::MuPerMm, 0.0), g).values)
        CHECK(v == 0.0);
    const Image f = testing::random_image(grid, Unit::MuPerMm, 5);
    Image f3 = f;
    for (double& v : f3.values)
        v *= 3.0;
    const Sinogram p = forward_project(f, g), p3 = forward_project(f3, g);
    for (std::size_t k = 0; k < p.values.size(); ++k)
        CHECK(p3.values[k] == Approx(3.0 * p.values[k]).margin(1e-12));
    for (double v : back_project(Sinogram(g, 0.0), grid).values)
        CHECK(v == 0.0);
    CHECK_THROWS_AS(forward_project(Image(grid, Unit::HU, 0.0), g), DataError);
}

TEST_CASE("masked operators split the full operator") {
    const FanBeamGeometry g = testing::tiny_scanner(12);
    const ImageGrid grid(32, 32, 1.0, 1.0);
    const Image f = testing::random_image(grid, Unit::MuPerMm, 6);
    const ChannelMask m = g.measured_mask();
    const Sinogram full = forward_project(f, g);
    const Sinogram pm = forward_project(f, g, m), pt = forward_project(f, g, invert(m));
    for (std::size_t k = 0; k < full.values.size(); ++k)
        CHECK(pm.values[k] + pt.values[k] == full.values[k]);
    CHECK(forward_project(f, g, all_channels(g)).values == full.values);

    Sinogram y(g, 0.5);
    const Image bm = back_project(y, grid, m), bt = back_project(y, grid, invert(m)), b = back_project(y, grid);
    for (std::size_t k = 0; k < b.values.size(); ++k)
        CHECK(bm.values[k] + bt.values[k] == Approx(b.values[k]).margin(1e-12));
    CHECK(back_project(y, grid, all_channels(g)).values == b.values);
    CHECK_THROWS_AS(forward_project(f, g, ChannelMask(3, true)), DataError);
}

TEST_CASE("projected water circle matches closed-form chords") {
    const FanBeamGeometry g = testing::scanner(36);
    const ImageGrid grid(256, 256, 1.25, 1.25);
    const auto circle = testing::water_circle(50.0);
    const Sinogram disc = forward_project(hu_to_mu(rasterize(circle, grid)), g);
    const Sinogram exact = analytic_sinogram(circle, g);
    for (int v = 0; v < g.n_views; ++v)
        CHECK(disc.at(v, 500) == Approx(exact.at(v, 500)).epsilon(0.02));
}

TEST_CASE("row and column sums") {
    const FanBeamGeometry g = testing::tiny_scanner(8);
    const ImageGrid grid(32, 32, 1.0, 1.0);
    const Sinogram rs = row_sums(g, grid);
    // central ray of view 0 runs along x through the full 32 mm box
    CHECK(0.5 * (rs.at(0, 23) + rs.at(0, 24)) == Approx(32.0).epsilon(0.02));
    for (double v : row_sums(g, grid, ChannelMask(48, false)).values)
        CHECK(v == 0.0);

    // single view: the fan spans |y| < 23.5 mm at x = 0
    const FanBeamGeometry one = testing::tiny_scanner(1);
    const ImageGrid wide(64, 64, 1.0, 1.0);
    const Image cs = col_sums(one, wide);
    CHECK(cs(32, 61) == 0.0);
    CHECK(cs(32, 32) > 0.0);
}

TEST_CASE("grid must fit between source and detector") {
    const FanBeamGeometry g = testing::tiny_scanner(4);
    CHECK_THROWS_AS(forward_project(Image(ImageGrid(200, 200, 1.0, 1.0), Unit::MuPerMm), g), ConfigError);
}
