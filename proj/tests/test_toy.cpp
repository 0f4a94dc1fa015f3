#include <doctest.h>

#include <pyraflow/core.hpp>
#include <pyraflow/toy.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "helpers.hpp"

using namespace pyraflow;

namespace {

// Mean endpoint error against ground truth over the masked pixels.
Scalar masked_epe(const FlowField& flow, const FlowField& gt, const Mask& m) {
    Scalar acc = 0.0;
    size_t n = 0;
    for (int y = 0; y < flow.height; ++y) {
        for (int x = 0; x < flow.width; ++x) {
            if (!m.at(y, x)) continue;
            const Scalar du = flow.u(y, x) - gt.u(y, x);
            const Scalar dv = flow.v(y, x) - gt.v(y, x);
            acc += std::sqrt(du * du + dv * dv);
            ++n;
        }
    }
    return n ? acc / n : 0.0;
}

// Count of frame-1 pixels that violate img2(x + gt(x)) == img1(x). Pixels
// whose target leaves the frame and pixels on the occlusion mask are skipped;
// tol 0 demands bit-exact carried values.
int rerender_violations(const SyntheticScene& sc, Scalar tol) {
    int bad = 0;
    for (int y = 0; y < sc.img1.height; ++y) {
        for (int x = 0; x < sc.img1.width; ++x) {
            const int tx = x + static_cast<int>(sc.gt.u(y, x));
            const int ty = y + static_cast<int>(sc.gt.v(y, x));
            if (tx < 0 || ty < 0 || tx >= sc.img1.width || ty >= sc.img1.height) continue;
            if (sc.occluded.at(y, x)) continue;
            if (std::abs(sc.img2.at(ty, tx) - sc.img1.at(y, x)) > tol) ++bad;
        }
    }
    return bad;
}

Scalar max_abs_image_diff(const Image& a, const Image& b) {
    Scalar m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

// Uniform-motion scene tuned for descent: piecewise-linear texture varying
// only along x, long period so matches stay unambiguous between levels.
SceneSpec descent_translation_spec(uint32_t seed) {
    SceneSpec s = make_translation_spec(seed, 1, 0);
    s.wave_shape = WaveShape::triangle;
    s.wave_amp_y = 0.0;
    s.wave_period = 64.0;
    s.wave_amp = 4.0;
    s.wave_base = 5.0;
    return s;
}

}  // namespace

TEST_SUITE("toy_scenes") {

TEST_CASE("same spec renders the same scene twice") {
    for (auto make : {make_box_and_dot_spec, make_tug_of_war_spec}) {
        const SyntheticScene a = gen_scene(make(9));
        const SyntheticScene b = gen_scene(make(9));
        CHECK(a.img1.data == b.img1.data);
        CHECK(a.img2.data == b.img2.data);
        CHECK(a.gt.data == b.gt.data);
    }
    const SyntheticScene a = gen_scene(make_translation_spec(4));
    const SyntheticScene b = gen_scene(make_translation_spec(4));
    CHECK(a.img1.data == b.img1.data);
    CHECK(a.img2.data == b.img2.data);
}

TEST_CASE("frame 2 is frame 1 carried by the ground truth") {
    // Layered scenes carry values bit-exactly.
    for (uint32_t seed = 1; seed <= 5; ++seed) {
        const SyntheticScene sc = gen_scene(make_box_and_dot_spec(seed));
        CHECK(rerender_violations(sc, 0.0) == 0);
    }
    for (uint32_t seed = 1; seed <= 3; ++seed) {
        const SyntheticScene sc = gen_scene(make_translation_spec(seed, 2, -2));
        CHECK(rerender_violations(sc, 0.0) == 0);
        CHECK(sc.occluded.count() == 0);
    }
    // Tug stripes are contrast overlays on a moving background, so their
    // carried values are close but not exact; the bound is a few background
    // slopes, far below the stripe contrast.
    for (uint32_t seed = 1; seed <= 3; ++seed) {
        const SyntheticScene sc = gen_scene(make_tug_of_war_spec(seed));
        CHECK(rerender_violations(sc, 1.0) == 0);
    }
}

TEST_CASE("zero-motion translation gives identical frames") {
    const SyntheticScene sc = gen_scene(make_translation_spec(7, 0, 0));
    CHECK(sc.img1.data == sc.img2.data);
    for (size_t i = 0; i < sc.gt.data.size(); ++i) CHECK(sc.gt.data[i] == 0.0);
}

TEST_CASE("box and dot geometry and masks") {
    const SyntheticScene sc = gen_scene(make_box_and_dot_spec(1));
    const SceneSpec& s = sc.spec;

    // dipole defaults to (box_top+6, box_left+3), two pixels tall
    CHECK(sc.object_mask.count() == 2);
    CHECK(sc.object_mask.at(14, 11));
    CHECK(sc.object_mask.at(15, 11));
    CHECK(sc.gt.u(14, 11) == s.obj_u);
    CHECK(sc.gt.v(14, 11) == s.obj_v);
    CHECK(sc.gt.u(10, 10) == s.bg_u);
    CHECK(sc.gt.u(0, 0) == 0.0);

    // top of the dipole is texture + contrast, bottom texture - contrast
    CHECK(sc.img1.at(14, 11) - sc.img1.at(15, 11) >=
          2.0 * s.dot_contrast - (s.texture_hi - s.texture_lo));

    // the box advances by bg_u, covering a 2-column canvas strip
    CHECK(sc.occluded.count() == 32);
    CHECK(sc.occluded.at(8, 24));
    CHECK(sc.occluded.at(23, 25));
    CHECK(!sc.occluded.at(0, 0));
    CHECK(!sc.occluded.at(14, 11));
}

TEST_CASE("tug stripes cancel at the coarse level and dominate the fine one") {
    SceneSpec with = make_tug_of_war_spec(3);
    SceneSpec without = with;
    without.line_contrast = 0.0;
    const SyntheticScene a = gen_scene(with);
    const SyntheticScene b = gen_scene(without);

    // each stripe fills 2x2 pooling blocks with +c/-c pairs, so block means
    // equal the plain background in both frames
    const Pyramid pa1 = build_pyramid(a.img1, 2), pb1 = build_pyramid(b.img1, 2);
    const Pyramid pa2 = build_pyramid(a.img2, 2), pb2 = build_pyramid(b.img2, 2);
    CHECK(max_abs_image_diff(pa1.levels[1], pb1.levels[1]) <= 1e-12);
    CHECK(max_abs_image_diff(pa2.levels[1], pb2.levels[1]) <= 1e-12);

    // at full resolution the stripes are the strongest structure
    CHECK(max_abs_image_diff(a.img1, b.img1) >= with.line_contrast - 1e-12);

    // 8 stripes of 2 full-height columns
    CHECK(a.object_mask.count() == 512);
    // background columns whose +1 target is covered by a stripe in frame 2
    CHECK(a.occluded.count() == 256);
    CHECK(a.occluded.at(0, 0));
    CHECK(!a.occluded.at(0, 1));
}

TEST_CASE("scene validation rejects bad specs") {
    SceneSpec s = make_box_and_dot_spec(1);
    s.texture_lo = 9.0;
    CHECK_THROWS_AS(gen_scene(s), std::invalid_argument);

    s = make_box_and_dot_spec(1);
    s.dot_row = 2;  // above the box
    CHECK_THROWS_AS(gen_scene(s), std::invalid_argument);

    s = make_translation_spec(1);
    s.wave_period = 0.0;
    CHECK_THROWS_AS(gen_scene(s), std::invalid_argument);

    s = make_tug_of_war_spec(1);
    s.line_stride = 3;
    CHECK_THROWS_AS(gen_scene(s), std::invalid_argument);

    s = make_tug_of_war_spec(1);
    s.line_col = 1;
    CHECK_THROWS_AS(gen_scene(s), std::invalid_argument);

    s = make_tug_of_war_spec(1);
    s.obj_u = -4;  // first stripe would exit the frame in frame 2
    CHECK_THROWS_AS(gen_scene(s), std::invalid_argument);

    s = make_box_and_dot_spec(1);
    s.height = 1;
    CHECK_THROWS_AS(gen_scene(s), std::invalid_argument);
}

}  // TEST_SUITE("toy_scenes")

TEST_SUITE("toy_wta") {

TEST_CASE("sampling recovers the counter-moving dipole, warping ghosts it") {
    int sample_exact = 0, warp_wrong = 0;
    for (uint32_t seed = 1; seed <= 20; ++seed) {
        const SyntheticScene sc = gen_scene(make_box_and_dot_spec(seed));
        SolveConfig cfg;  // 2 levels, delta 4, sad
        cfg.mode = MatchMode::sample;
        const FlowField fs = coarse_to_fine_wta(sc.img1, sc.img2, cfg);
        cfg.mode = MatchMode::warp;
        const FlowField fw = coarse_to_fine_wta(sc.img1, sc.img2, cfg);
        if (masked_epe(fs, sc.gt, sc.object_mask) == 0.0) ++sample_exact;
        if (masked_epe(fw, sc.gt, sc.object_mask) >= 1.0) ++warp_wrong;
    }
    CHECK(sample_exact == 20);
    CHECK(warp_wrong == 20);
}

TEST_CASE("warping's dipole error is the half-ghost match") {
    // The pre-warp by the upsampled box motion drags the dipole +2 columns,
    // leaving a ghost; the best in-window explanation lands halfway between
    // the box motion and the true dipole motion.
    for (uint32_t seed : {1u, 2u, 3u}) {
        const SyntheticScene sc = gen_scene(make_box_and_dot_spec(seed));
        SolveConfig cfg;
        cfg.mode = MatchMode::warp;
        const FlowField fw = coarse_to_fine_wta(sc.img1, sc.img2, cfg);
        for (int y = 0; y < fw.height; ++y) {
            for (int x = 0; x < fw.width; ++x) {
                if (!sc.object_mask.at(y, x)) continue;
                CHECK(fw.u(y, x) == -1.0);
                CHECK(fw.v(y, x) == 0.0);
            }
        }
    }
}

TEST_CASE("interior translation is recovered exactly by both modes") {
    for (uint32_t seed = 1; seed <= 5; ++seed) {
        const SyntheticScene sc = gen_scene(make_translation_spec(seed, 2, -2));
        for (MatchMode mode : {MatchMode::sample, MatchMode::warp}) {
            SolveConfig cfg;
            cfg.mode = mode;
            const FlowField f = coarse_to_fine_wta(sc.img1, sc.img2, cfg);
            int bad = 0;
            for (int y = 8; y < 24; ++y)
                for (int x = 8; x < 24; ++x)
                    if (f.u(y, x) != 2.0 || f.v(y, x) != -2.0) ++bad;
            CHECK(bad == 0);
        }
    }
}

TEST_CASE("warp and sample picks agree under constant integer incoming flow") {
    // With an integer constant incoming flow the pre-warped image is an exact
    // shift, so both strategies score identical candidate positions.
    auto rng = testutil::make_rng(71);
    for (int trial = 0; trial < 5; ++trial) {
        const Image i1 = testutil::random_image(rng, 16, 16);
        const Image i2 = testutil::random_image(rng, 16, 16);
        const FlowField incoming(16, 16, 1.0, -1.0);
        const SearchRange range{2};
        for (MatchDistance d : {MatchDistance::sad, MatchDistance::corr}) {
            const FlowField a =
                wta_single_level(i1, i2, incoming, range, MatchMode::warp, d);
            const FlowField b =
                wta_single_level(i1, i2, incoming, range, MatchMode::sample, d);
            CHECK(a.data == b.data);
        }
    }
}

TEST_CASE("static scene yields zero flow") {
    const SyntheticScene sc = gen_scene(make_translation_spec(7, 0, 0));
    SolveConfig cfg;
    const FlowField f = coarse_to_fine_wta(sc.img1, sc.img2, cfg);
    for (Scalar x : f.data) CHECK(x == 0.0);
}

}  // TEST_SUITE("toy_wta")

TEST_SUITE("toy_descent") {

TEST_CASE("trace entries are well formed") {
    const SyntheticScene sc = gen_scene(make_tug_of_war_spec(1));
    SolveConfig cfg;
    cfg.step = 2e-3;
    cfg.iters = 25;
    cfg.coarse_init_u = -0.75;
    const DescentResult r = two_level_descent(sc.img1, sc.img2, cfg);

    CHECK(!r.trace.diverged);
    CHECK(r.trace.entries.size() == 25);
    CHECK(r.coarse_trajectory.size() == 25);
    for (const auto& e : r.trace.entries) {
        CHECK(std::isfinite(e.ncc));
        CHECK(e.ncc >= -1.0 - 1e-12);
        CHECK(e.ncc <= 1.0 + 1e-12);
        CHECK(e.sigma2 >= 0.0);
        CHECK(e.loss_coarse >= 0.0);
        CHECK(e.loss_fine >= 0.0);
        CHECK(e.grad_direct.height == r.coarse_flow.height);
        CHECK(e.grad_direct.width == r.coarse_flow.width);
        CHECK(e.grad_via_fine.height == r.coarse_flow.height);
        CHECK(e.grad_via_fine.width == r.coarse_flow.width);
    }
    // fine flow is the upsampled coarse flow plus the residual
    const FlowField up = upsample_flow(r.coarse_flow, sc.img1.height, sc.img1.width);
    for (size_t i = 0; i < r.fine_flow.data.size(); ++i)
        CHECK(r.fine_flow.data[i] == doctest::Approx(up.data[i] + r.fine_residual.data[i]).epsilon(1e-12));
}

TEST_CASE("stopped coarse trajectory matches optimizing the coarse loss alone") {
    const SyntheticScene sc = gen_scene(make_tug_of_war_spec(1));
    SolveConfig cfg;
    cfg.step = 2e-3;
    cfg.iters = 60;
    cfg.coarse_init_u = -0.75;

    cfg.stop_gradient = true;
    const DescentResult stopped = two_level_descent(sc.img1, sc.img2, cfg);
    const DescentResult alone = coarse_only_descent(sc.img1, sc.img2, cfg);

    REQUIRE(stopped.coarse_trajectory.size() == alone.coarse_trajectory.size());
    for (size_t t = 0; t < stopped.coarse_trajectory.size(); ++t)
        CHECK(stopped.coarse_trajectory[t].data == alone.coarse_trajectory[t].data);
    CHECK(stopped.coarse_flow.data == alone.coarse_flow.data);

    // sanity: without stopping, the cross-level term changes the trajectory
    cfg.stop_gradient = false;
    const DescentResult free_run = two_level_descent(sc.img1, sc.img2, cfg);
    CHECK(free_run.coarse_flow.data != alone.coarse_flow.data);
}

TEST_CASE("identical motion at both levels keeps stopping benign") {
    // Pure linear ramp (period longer than the frame, pinned phase) so every
    // pixel's pooled value has a unique reachable match. The rightmost column
    // is excluded: its match lies outside the frame, the clamped sampler has
    // zero slope there, and the pixel freezes at whatever the upsampled
    // coarse flow imposes, which legitimately differs between variants.
    SceneSpec s = make_translation_spec(1, 1, 0);
    s.wave_shape = WaveShape::triangle;
    s.wave_amp_y = 0.0;
    s.wave_period = 128.0;
    s.wave_amp = 8.0;
    s.wave_base = 5.0;
    s.wave_phase_x = 16.0;
    const SyntheticScene sc = gen_scene(s);

    SolveConfig cfg;
    cfg.step = 1e-4;
    cfg.iters = 6000;
    cfg.coarse_init_u = 0.45;

    cfg.stop_gradient = true;
    const DescentResult stopped = two_level_descent(sc.img1, sc.img2, cfg);
    cfg.stop_gradient = false;
    const DescentResult free_run = two_level_descent(sc.img1, sc.img2, cfg);

    Scalar max_diff = 0.0, max_err = 0.0;
    for (int y = 0; y < sc.img1.height; ++y) {
        for (int x = 0; x < sc.img1.width - 1; ++x) {
            max_diff = std::max(max_diff, std::abs(stopped.fine_flow.u(y, x) -
                                                   free_run.fine_flow.u(y, x)));
            max_err = std::max(max_err, std::abs(free_run.fine_flow.u(y, x) - 1.0));
            // no vertical texture, so v never moves
            CHECK(stopped.fine_flow.v(y, x) == 0.0);
        }
    }
    CHECK(max_diff <= 1e-3);
    CHECK(max_err <= 1e-3);
}

TEST_CASE("aligned levels agree, conflicting levels oppose") {
    // uniform motion: both levels pull the coarse flow the same way
    Scalar uniform_sum = 0.0;
    for (uint32_t seed = 1; seed <= 20; ++seed) {
        const SyntheticScene sc = gen_scene(descent_translation_spec(seed));
        SolveConfig cfg;
        cfg.step = 2e-4;
        cfg.iters = 200;
        const DescentResult r = two_level_descent(sc.img1, sc.img2, cfg);
        CHECK(r.mean_ncc >= 0.85);
        uniform_sum += r.mean_ncc;
    }
    CHECK(uniform_sum / 20.0 >= 0.9);

    // stripes against the background: the fine level pulls the coarse flow
    // away from the coarse level's own descent direction
    Scalar conflict_sum = 0.0;
    for (uint32_t seed = 1; seed <= 20; ++seed) {
        SceneSpec s = make_tug_of_war_spec(seed);
        s.line_contrast = 2.0;
        const SyntheticScene sc = gen_scene(s);
        SolveConfig cfg;
        cfg.step = 1e-4;
        cfg.iters = 200;
        cfg.coarse_init_u = -0.75;
        const DescentResult r = two_level_descent(sc.img1, sc.img2, cfg);
        CHECK(r.mean_ncc < 0.0);
        conflict_sum += r.mean_ncc;
    }
    CHECK(conflict_sum / 20.0 <= -0.2);
}

TEST_CASE("stopping the cross-level gradient wins under conflicting motion") {
    std::vector<Scalar> stopped_losses, free_losses;
    int wins = 0;
    for (uint32_t seed = 1; seed <= 20; ++seed) {
        const SyntheticScene sc = gen_scene(make_tug_of_war_spec(seed));
        SolveConfig cfg;
        cfg.step = 2e-3;
        cfg.iters = 200;
        cfg.coarse_init_u = -0.75;

        cfg.stop_gradient = true;
        const DescentResult rs = two_level_descent(sc.img1, sc.img2, cfg);
        cfg.stop_gradient = false;
        const DescentResult rf = two_level_descent(sc.img1, sc.img2, cfg);

        const Scalar ls = rs.final_loss_coarse + rs.final_loss_fine;
        const Scalar lf = rf.final_loss_coarse + rf.final_loss_fine;
        stopped_losses.push_back(ls);
        free_losses.push_back(lf);
        if (ls <= lf) ++wins;
    }
    std::sort(stopped_losses.begin(), stopped_losses.end());
    std::sort(free_losses.begin(), free_losses.end());
    const Scalar med_stopped =
        0.5 * (stopped_losses[9] + stopped_losses[10]);
    const Scalar med_free = 0.5 * (free_losses[9] + free_losses[10]);
    CHECK(med_stopped < med_free);
    CHECK(wins >= 18);
}

TEST_CASE("static scene stays at zero") {
    const SyntheticScene sc = gen_scene(make_translation_spec(7, 0, 0));
    SolveConfig cfg;
    cfg.step = 1e-3;
    cfg.iters = 20;
    const DescentResult r = two_level_descent(sc.img1, sc.img2, cfg);
    CHECK(r.final_loss_coarse == 0.0);
    CHECK(r.final_loss_fine == 0.0);
    for (Scalar x : r.fine_flow.data) CHECK(x == 0.0);
    // every iteration is degenerate (both partials vanish), so the mean skips them
    CHECK(r.mean_ncc == 0.0);
}

TEST_CASE("divergence is reported with its iteration") {
    const SyntheticScene sc = gen_scene(make_tug_of_war_spec(1));
    SolveConfig cfg;
    cfg.step = 1e308;
    cfg.iters = 10;
    const DescentResult r = two_level_descent(sc.img1, sc.img2, cfg);
    CHECK(r.trace.diverged);
    CHECK(r.trace.divergence_iter == 0);
    CHECK(r.trace.entries.size() < 10);
    CHECK(std::isinf(r.final_loss_coarse));
    CHECK(std::isinf(r.final_loss_fine));
}

TEST_CASE("solver config validation") {
    const SyntheticScene sc = gen_scene(make_tug_of_war_spec(1));
    SolveConfig cfg;

    SolveConfig bad = cfg;
    bad.n_levels = 3;
    CHECK_THROWS_AS(two_level_descent(sc.img1, sc.img2, bad), std::invalid_argument);
    CHECK_THROWS_AS(coarse_only_descent(sc.img1, sc.img2, bad), std::invalid_argument);

    bad = cfg;
    bad.step = 0.0;
    CHECK_THROWS_AS(two_level_descent(sc.img1, sc.img2, bad), std::invalid_argument);

    bad = cfg;
    bad.iters = -1;
    CHECK_THROWS_AS(two_level_descent(sc.img1, sc.img2, bad), std::invalid_argument);

    const Image empty;
    CHECK_THROWS_AS(two_level_descent(empty, sc.img2, cfg), std::invalid_argument);

    const Image small(8, 8, 1);
    CHECK_THROWS_AS(two_level_descent(sc.img1, small, cfg), std::invalid_argument);

    bad = cfg;
    bad.n_levels = 0;
    CHECK_THROWS_AS(coarse_to_fine_wta(sc.img1, sc.img2, bad), std::invalid_argument);
}

}  // TEST_SUITE("toy_descent")
