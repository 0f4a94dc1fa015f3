#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "pyraflow/core.hpp"

using namespace pyraflow;
using testutil::make_rng;
using testutil::random_image;
using testutil::random_flow;

using testutil::oracle_bilinear;

namespace {

Image make_2x2() {
    Image img(2, 2, 1);
    img.at(0, 0) = 0.0;
    img.at(0, 1) = 1.0;
    img.at(1, 0) = 2.0;
    img.at(1, 1) = 3.0;
    return img;
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("bilinear_sample at integer coordinates returns stored values") {
    const Image img = make_2x2();
    CHECK(bilinear_sample(img, 0, 0) == 0.0);
    CHECK(bilinear_sample(img, 1, 0) == 1.0);
    CHECK(bilinear_sample(img, 0, 1) == 2.0);
    CHECK(bilinear_sample(img, 1, 1) == 3.0);
}

TEST_CASE("bilinear_sample center of 2x2 cell") {
    const Image img = make_2x2();
    CHECK(bilinear_sample(img, 0.5, 0.5) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("bilinear_sample matches 4-corner oracle on random probes") {
    auto rng = make_rng(11);
    const Image img = random_image(rng, 8, 8, 2);
    std::uniform_real_distribution<double> coord(-2.0, 9.0);
    for (int i = 0; i < 500; ++i) {
        const Scalar u = coord(rng);
        const Scalar v = coord(rng);
        for (int c = 0; c < 2; ++c) {
            CHECK(bilinear_sample(img, u, v, c) ==
                  doctest::Approx(oracle_bilinear(img, u, v, c)).epsilon(1e-12));
        }
    }
}

TEST_CASE("bilinear_sample clamps out-of-bounds probes to the border") {
    const Image img = make_2x2();
    CHECK(bilinear_sample(img, -5.0, 0.0) == 0.0);
    CHECK(bilinear_sample(img, 7.0, 7.0) == 3.0);
    CHECK(bilinear_sample(img, 0.5, -3.0) == doctest::Approx(0.5));
}

TEST_CASE("bilinear_sample is exact on affine images at interior points") {
    const Scalar a = 0.7, b = -1.3, c0 = 2.5;
    Image img(6, 7, 1);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            img.at(y, x) = a * x + b * y + c0;
    auto rng = make_rng(12);
    std::uniform_real_distribution<double> cu(0.0, 6.0), cv(0.0, 5.0);
    for (int i = 0; i < 200; ++i) {
        const Scalar u = cu(rng), v = cv(rng);
        CHECK(bilinear_sample(img, u, v) ==
              doctest::Approx(a * u + b * v + c0).epsilon(1e-12));
    }
}

TEST_CASE("bilinear_sample_grad on constant image is zero") {
    Image img(4, 4, 1, 3.25);
    auto g = bilinear_sample_grad(img, 1.3, 2.7);
    CHECK(g.du == 0.0);
    CHECK(g.dv == 0.0);
}

TEST_CASE("bilinear_sample_grad on a horizontal ramp is (1, 0)") {
    Image img(4, 5, 1);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x)
            img.at(y, x) = static_cast<Scalar>(x);
    auto g = bilinear_sample_grad(img, 2.3, 1.6);
    CHECK(g.du == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(g.dv == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("bilinear_sample_grad matches central finite differences") {
    auto rng = make_rng(13);
    const Image img = random_image(rng, 9, 9, 1);
    // Interior probes with fractional parts away from the integer crossings,
    // where the derivative of the piecewise-bilinear surface is smooth.
    std::uniform_int_distribution<int> cell(1, 6);
    std::uniform_real_distribution<double> frac(0.2, 0.8);
    const Scalar h = 1e-3;
    for (int i = 0; i < 300; ++i) {
        const Scalar u = cell(rng) + frac(rng);
        const Scalar v = cell(rng) + frac(rng);
        const auto g = bilinear_sample_grad(img, u, v);
        const Scalar fd_u =
            (bilinear_sample(img, u + h, v) - bilinear_sample(img, u - h, v)) / (2 * h);
        const Scalar fd_v =
            (bilinear_sample(img, u, v + h) - bilinear_sample(img, u, v - h)) / (2 * h);
        CHECK(g.du == doctest::Approx(fd_u).epsilon(1e-4));
        CHECK(g.dv == doctest::Approx(fd_v).epsilon(1e-4));
    }
}

TEST_CASE("bilinear derivative is discontinuous across integer coordinates") {
    auto rng = make_rng(14);
    const Image img = random_image(rng, 8, 8, 1);
    // Just left vs just right of an integer column: the cell changes, so for
    // a generic image the derivative jumps.
    Scalar max_jump = 0.0;
    for (int x = 2; x <= 5; ++x) {
        for (int y = 1; y <= 6; ++y) {
            const Scalar left = bilinear_sample_grad(img, x - 1e-9, y + 0.5).du;
            const Scalar right = bilinear_sample_grad(img, x + 1e-9, y + 0.5).du;
            max_jump = std::max(max_jump, std::abs(left - right));
        }
    }
    CHECK(max_jump > 0.0);
}

TEST_CASE("bilinear_sample_grad uses the right-sided cell at integers") {
    const Image img = make_2x2();
    // At (0,0) the derivative should describe the cell to the right/below.
    auto g = bilinear_sample_grad(img, 0.0, 0.0);
    CHECK(g.du == doctest::Approx(1.0));
    CHECK(g.dv == doctest::Approx(2.0));
    // At the far corner the right-sided cell is degenerate and the clamped
    // value function is constant, so the derivative vanishes.
    auto gc = bilinear_sample_grad(img, 1.0, 1.0);
    CHECK(gc.du == 0.0);
    CHECK(gc.dv == 0.0);
}

TEST_CASE("warp_image with zero flow is the identity, bit-exact") {
    auto rng = make_rng(15);
    const Image img = random_image(rng, 6, 7, 3);
    const FlowField zero(6, 7);
    const Image out = warp_image(img, zero);
    REQUIRE(out.data.size() == img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(out.data[i] == img.data[i]);
}

TEST_CASE("warp_image single row shift with border clamp") {
    Image img(1, 4, 1);
    for (int x = 0; x < 4; ++x) img.at(0, x) = static_cast<Scalar>(x);
    FlowField flow(1, 4, 1.0, 0.0);
    const Image out = warp_image(img, flow);
    CHECK(out.at(0, 0) == 1.0);
    CHECK(out.at(0, 1) == 2.0);
    CHECK(out.at(0, 2) == 3.0);
    CHECK(out.at(0, 3) == 3.0);
}

TEST_CASE("warp_image matches per-pixel sampling oracle on random inputs") {
    auto rng = make_rng(16);
    const Image img = random_image(rng, 7, 6, 2);
    const FlowField flow = random_flow(rng, 7, 6, -3.0, 3.0);
    const Image out = warp_image(img, flow);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 6; ++x)
            for (int c = 0; c < 2; ++c)
                CHECK(out.at(y, x, c) ==
                      doctest::Approx(oracle_bilinear(img, x + flow.u(y, x),
                                                      y + flow.v(y, x), c))
                          .epsilon(1e-12));
}

TEST_CASE("build_pyramid keeps constant images constant across 3 levels") {
    Image img(8, 8, 1, 0.75);
    const Pyramid pyr = build_pyramid(img, 3);
    REQUIRE(pyr.levels.size() == 3);
    CHECK(pyr.levels[1].height == 4);
    CHECK(pyr.levels[2].height == 2);
    for (const auto& level : pyr.levels)
        for (Scalar px : level.data) CHECK(px == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("build_pyramid 4x4 checkerboard pools to all 0.5") {
    Image img(4, 4, 1);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            img.at(y, x) = static_cast<Scalar>((x + y) % 2);
    const Pyramid pyr = build_pyramid(img, 2);
    REQUIRE(pyr.levels[1].height == 2);
    REQUIRE(pyr.levels[1].width == 2);
    for (Scalar px : pyr.levels[1].data) CHECK(px == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("build_pyramid odd sizes use ceil dims and clipped block means") {
    auto rng = make_rng(17);
    const Image img = random_image(rng, 5, 7, 2);
    const Pyramid pyr = build_pyramid(img, 2);
    const Image& lvl = pyr.levels[1];
    REQUIRE(lvl.height == 3);
    REQUIRE(lvl.width == 4);
    // Independent block mean with explicit clipping.
    for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 4; ++x) {
            for (int c = 0; c < 2; ++c) {
                Scalar sum = 0.0;
                int n = 0;
                for (int yy = 2 * y; yy < std::min(2 * y + 2, 5); ++yy)
                    for (int xx = 2 * x; xx < std::min(2 * x + 2, 7); ++xx) {
                        sum += img.at(yy, xx, c);
                        ++n;
                    }
                CHECK(lvl.at(y, x, c) == doctest::Approx(sum / n).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("upsample_flow of a zero field is zero") {
    const FlowField zero(3, 3);
    const FlowField fine = upsample_flow(zero);
    CHECK(fine.height == 6);
    CHECK(fine.width == 6);
    for (Scalar x : fine.data) CHECK(x == 0.0);
}

TEST_CASE("upsample_flow doubles constant displacement values") {
    const FlowField coarse(2, 2, 1.0, -0.5);
    const FlowField fine = upsample_flow(coarse);
    REQUIRE(fine.height == 4);
    REQUIRE(fine.width == 4);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            CHECK(fine.u(y, x) == doctest::Approx(2.0).epsilon(1e-12));
            CHECK(fine.v(y, x) == doctest::Approx(-1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("upsample_flow matches the interpolation oracle on a linear ramp") {
    FlowField coarse(4, 4);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            coarse.u(y, x) = 0.25 * x - 0.5 * y + 1.0;
            coarse.v(y, x) = -0.75 * x + 0.125 * y;
        }
    }
    const FlowField fine = upsample_flow(coarse);
    // Oracle: sample the coarse field at half-pixel-centered positions with
    // the 4-corner formula and scale by the pyramid factor.
    Image uplane(4, 4, 1), vplane(4, 4, 1);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            uplane.at(y, x) = coarse.u(y, x);
            vplane.at(y, x) = coarse.v(y, x);
        }
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            const Scalar su = (x + 0.5) / 2.0 - 0.5;
            const Scalar sv = (y + 0.5) / 2.0 - 0.5;
            CHECK(fine.u(y, x) ==
                  doctest::Approx(2.0 * oracle_bilinear(uplane, su, sv, 0)).epsilon(1e-12));
            CHECK(fine.v(y, x) ==
                  doctest::Approx(2.0 * oracle_bilinear(vplane, su, sv, 0)).epsilon(1e-12));
        }
    }
}

TEST_CASE("upsample_flow crops to requested odd dims") {
    auto rng = make_rng(18);
    const FlowField coarse = random_flow(rng, 4, 3);
    const FlowField full = upsample_flow(coarse);
    const FlowField cropped = upsample_flow(coarse, 7, 5);
    REQUIRE(cropped.height == 7);
    REQUIRE(cropped.width == 5);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 5; ++x) {
            CHECK(cropped.u(y, x) == full.u(y, x));
            CHECK(cropped.v(y, x) == full.v(y, x));
        }
}

TEST_CASE("upsample_flow_adjoint satisfies the inner-product identity") {
    // <upsample(c), g> == <c, adjoint(g)> for random fields: the defining
    // property of the transpose, checked without reference to the weights.
    auto rng = make_rng(19);
    const FlowField coarse = random_flow(rng, 3, 4);
    const FlowField fine_grad = random_flow(rng, 6, 8);
    const FlowField up = upsample_flow(coarse);
    const FlowField adj = upsample_flow_adjoint(fine_grad, 3, 4);
    Scalar lhs = 0.0, rhs = 0.0;
    for (size_t i = 0; i < up.data.size(); ++i) lhs += up.data[i] * fine_grad.data[i];
    for (size_t i = 0; i < coarse.data.size(); ++i) rhs += coarse.data[i] * adj.data[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("shape errors are rejected") {
    CHECK_THROWS_AS(bilinear_sample(Image(), 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(warp_image(Image(2, 2), FlowField(3, 3)), std::invalid_argument);
    CHECK_THROWS_AS(build_pyramid(Image(2, 2), 0), std::invalid_argument);
    CHECK_THROWS_AS(upsample_flow(FlowField()), std::invalid_argument);
}

}  // TEST_SUITE
