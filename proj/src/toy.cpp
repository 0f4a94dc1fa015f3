#include "pyraflow/toy.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <utility>

namespace pyraflow {

namespace {

constexpr Scalar kDegenerateNorm = 1e-14;

Scalar l2_norm(const std::vector<Scalar>& xs) {
    Scalar acc = 0.0;
    for (Scalar x : xs) acc += x * x;
    return std::sqrt(acc);
}

bool all_finite(const std::vector<Scalar>& xs) {
    for (Scalar x : xs)
        if (!std::isfinite(x)) return false;
    return true;
}

FlowField as_flow(const FlowGradField& g) {
    FlowField f(g.height, g.width);
    f.data = g.data;
    return f;
}

// Owner ids per layer; frame 2 repaints each layer displaced by its motion.
enum : int { kOwnerBg = 0, kOwnerBox = 1, kOwnerObj = 2 };

struct FramePaint {
    Image img;
    std::vector<int> owner;

    FramePaint(int h, int w, Scalar fill)
        : img(h, w, 1, fill), owner(static_cast<size_t>(h) * w, kOwnerBg) {}

    void put(int y, int x, Scalar value, int who) {
        if (y < 0 || y >= img.height || x < 0 || x >= img.width) return;
        img.at(y, x) = value;
        owner[static_cast<size_t>(y) * img.width + x] = who;
    }
    int owner_at(int y, int x) const {
        return owner[static_cast<size_t>(y) * img.width + x];
    }
};

void fill_gt_and_masks(SyntheticScene& scene, const FramePaint& f1,
                       const FramePaint& f2) {
    const SceneSpec& s = scene.spec;
    const int h = s.height, w = s.width;
    scene.gt = FlowField(h, w);
    scene.object_mask = Mask(h, w);
    scene.occluded = Mask(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int who = f1.owner_at(y, x);
            int mu = 0, mv = 0;
            if (who == kOwnerBox) {
                mu = s.bg_u;
                mv = s.bg_v;
            } else if (who == kOwnerObj) {
                mu = s.obj_u;
                mv = s.obj_v;
                scene.object_mask.at(y, x) = 1;
            } else if (s.kind != SceneKind::box_and_dot) {
                // outside box_and_dot the base layer itself drifts
                mu = s.bg_u;
                mv = s.bg_v;
            }
            scene.gt.u(y, x) = mu;
            scene.gt.v(y, x) = mv;
            const int ty = y + mv, tx = x + mu;
            if (ty >= 0 && ty < h && tx >= 0 && tx < w &&
                f2.owner_at(ty, tx) != who)
                scene.occluded.at(y, x) = 1;
        }
    }
}

SyntheticScene render_box_and_dot(const SceneSpec& s) {
    if (s.box_size < 1) throw std::invalid_argument("gen_scene: box_size < 1");
    if (s.texture_lo > s.texture_hi)
        throw std::invalid_argument("gen_scene: texture range inverted");
    int dr = s.dot_row >= 0 ? s.dot_row : s.box_top + 6;
    int dc = s.dot_col >= 0 ? s.dot_col : s.box_left + 3;
    if (dr < s.box_top || dr + 1 >= s.box_top + s.box_size || dc < s.box_left ||
        dc >= s.box_left + s.box_size)
        throw std::invalid_argument("gen_scene: dot outside the box");

    std::mt19937 rng(s.seed);
    std::uniform_real_distribution<double> tex(s.texture_lo, s.texture_hi);
    Image texture(s.box_size, s.box_size, 1);
    for (auto& t : texture.data) t = tex(rng);

    const Scalar top_value = texture.at(dr - s.box_top, dc - s.box_left) + s.dot_contrast;
    const Scalar bot_value =
        texture.at(dr + 1 - s.box_top, dc - s.box_left) - s.dot_contrast;

    auto paint = [&](int f) {
        FramePaint frame(s.height, s.width, s.canvas_value);
        for (int r = 0; r < s.box_size; ++r)
            for (int c = 0; c < s.box_size; ++c)
                frame.put(s.box_top + r + f * s.bg_v, s.box_left + c + f * s.bg_u,
                          texture.at(r, c), kOwnerBox);
        frame.put(dr + f * s.obj_v, dc + f * s.obj_u, top_value, kOwnerObj);
        frame.put(dr + 1 + f * s.obj_v, dc + f * s.obj_u, bot_value, kOwnerObj);
        return frame;
    };

    SyntheticScene scene;
    scene.spec = s;
    scene.spec.dot_row = dr;
    scene.spec.dot_col = dc;
    FramePaint f1 = paint(0), f2 = paint(1);
    fill_gt_and_masks(scene, f1, f2);
    scene.img1 = std::move(f1.img);
    scene.img2 = std::move(f2.img);
    return scene;
}

// Triangular wave with unit period and range [-1, 1]; piecewise linear, so
// the sampled texture has the same |slope| everywhere and sign-based descent
// never stalls on flat spots.
Scalar tri(Scalar t) {
    const Scalar f = t - std::floor(t);
    return 1.0 - 4.0 * std::abs(f - 0.5);
}

SyntheticScene render_waves(const SceneSpec& s) {
    if (s.wave_period <= 0.0)
        throw std::invalid_argument("gen_scene: wave_period must be positive");
    if (s.kind == SceneKind::tug_of_war) {
        if (s.line_col % 2 != 0 || s.line_stride % 2 != 0 || s.line_stride < 4)
            throw std::invalid_argument(
                "gen_scene: line_col and line_stride must be even, stride >= 4");
        if (s.line_col + s.obj_u < 0 || s.line_col < 0 ||
            s.line_col + 1 + s.obj_u >= s.width)
            throw std::invalid_argument("gen_scene: stripe leaves the frame");
    }
    std::mt19937 rng(s.seed);
    std::uniform_real_distribution<double> phase(0.0, s.wave_period);
    const Scalar draw_x = phase(rng), draw_y = phase(rng);
    const Scalar phi_x = s.wave_phase_x >= 0.0 ? s.wave_phase_x : draw_x;
    const Scalar phi_y = s.wave_phase_y >= 0.0 ? s.wave_phase_y : draw_y;
    const Scalar amp_y = s.wave_amp_y < 0.0 ? s.wave_amp : s.wave_amp_y;
    auto ridge = [&](Scalar t) {
        return s.wave_shape == WaveShape::sine
                   ? std::sin(2.0 * std::numbers::pi * t)
                   : tri(t);
    };
    auto wave = [&](int y, int x) {
        return s.wave_base + s.wave_amp * ridge((x + phi_x) / s.wave_period) +
               amp_y * ridge((y + phi_y) / s.wave_period);
    };

    auto paint = [&](int f) {
        FramePaint frame(s.height, s.width, 0.0);
        for (int y = 0; y < s.height; ++y)
            for (int x = 0; x < s.width; ++x)
                frame.img.at(y, x) = wave(y - f * s.bg_v, x - f * s.bg_u);
        if (s.kind == SceneKind::tug_of_war) {
            // Contrast overlays on the frame's own background: +contrast on the
            // left column of each stripe, -contrast on the right, full height.
            for (int c0 = s.line_col; c0 + 1 < s.width; c0 += s.line_stride) {
                const int cl = c0 + f * s.obj_u, cr = c0 + 1 + f * s.obj_u;
                for (int y = 0; y < s.height; ++y) {
                    const int yy = y + f * s.obj_v;
                    if (cl >= 0 && cl < s.width && yy >= 0 && yy < s.height)
                        frame.put(yy, cl, frame.img.at(yy, cl) + s.line_contrast,
                                  kOwnerObj);
                    if (cr >= 0 && cr < s.width && yy >= 0 && yy < s.height)
                        frame.put(yy, cr, frame.img.at(yy, cr) - s.line_contrast,
                                  kOwnerObj);
                }
            }
        }
        return frame;
    };

    SyntheticScene scene;
    scene.spec = s;
    FramePaint f1 = paint(0), f2 = paint(1);
    fill_gt_and_masks(scene, f1, f2);
    scene.img1 = std::move(f1.img);
    scene.img2 = std::move(f2.img);
    return scene;
}

// Summed single-offset SAD cost of the given flow, plus its gradient.
struct LevelEval {
    Scalar loss = 0.0;
    FlowGradField grad;
};

LevelEval eval_sad_level(const Image& a, const Image& b, const FlowField& flow) {
    const SearchRange window{0};
    const CostVolume v = cv_sample_sad(a, b, flow, window);
    LevelEval out;
    for (Scalar x : v.data) out.loss += x;
    CostVolume ones(a.height, a.width, 0);
    for (auto& x : ones.data) x = 1.0;
    out.grad = cv_grad_wrt_flow(a, b, flow, ones, CostMode::sample_sad, false);
    return out;
}

void check_descent_inputs(const Image& img1, const Image& img2,
                          const SolveConfig& cfg) {
    if (img1.empty() || img2.empty())
        throw std::invalid_argument("descent: empty image");
    if (img1.height != img2.height || img1.width != img2.width ||
        img1.channels != img2.channels)
        throw std::invalid_argument("descent: image dims differ");
    if (cfg.step <= 0.0) throw std::invalid_argument("descent: step must be positive");
    if (cfg.iters < 0) throw std::invalid_argument("descent: negative iteration count");
}

}  // namespace

SceneSpec make_box_and_dot_spec(uint32_t seed) {
    SceneSpec s;
    s.kind = SceneKind::box_and_dot;
    s.seed = seed;
    return s;
}

SceneSpec make_translation_spec(uint32_t seed, int u, int v) {
    SceneSpec s;
    s.kind = SceneKind::translation;
    s.seed = seed;
    s.bg_u = u;
    s.bg_v = v;
    s.obj_u = 0;
    s.obj_v = 0;
    return s;
}

SceneSpec make_tug_of_war_spec(uint32_t seed) {
    SceneSpec s;
    s.kind = SceneKind::tug_of_war;
    s.seed = seed;
    s.bg_u = 1;
    s.bg_v = 0;
    s.obj_u = -2;
    s.obj_v = 0;
    // horizontal motions only, so keep the texture horizontal too; vertical
    // texture would add v gradients that say nothing about the conflict. The
    // triangular shape keeps descent speed uniform across pixels.
    s.wave_shape = WaveShape::triangle;
    s.wave_amp_y = 0.0;
    return s;
}

SyntheticScene gen_scene(const SceneSpec& spec) {
    if (spec.height < 2 || spec.width < 2)
        throw std::invalid_argument("gen_scene: frame too small");
    switch (spec.kind) {
        case SceneKind::box_and_dot: return render_box_and_dot(spec);
        case SceneKind::translation:
        case SceneKind::tug_of_war: return render_waves(spec);
    }
    throw std::invalid_argument("gen_scene: unknown kind");
}

CostMode to_cost_mode(MatchMode mode, MatchDistance distance) {
    if (mode == MatchMode::warp)
        return distance == MatchDistance::corr ? CostMode::warp_corr
                                               : CostMode::warp_sad;
    return distance == MatchDistance::corr ? CostMode::sample_corr
                                           : CostMode::sample_sad;
}

FlowField wta_single_level(const Image& img1, const Image& img2,
                           const FlowField& incoming, const SearchRange& range,
                           MatchMode mode, MatchDistance distance) {
    const CostVolume vol =
        build_cost_volume(img1, img2, incoming, range, to_cost_mode(mode, distance));
    const bool minimize = distance == MatchDistance::sad;
    const int d = range.delta;
    FlowField out(img1.height, img1.width);
    for (int y = 0; y < img1.height; ++y) {
        for (int x = 0; x < img1.width; ++x) {
            Scalar best = 0.0;
            int best_du = 0, best_dv = 0, best_norm2 = 0;
            bool first = true;
            for (int dv = -d; dv <= d; ++dv) {
                for (int du = -d; du <= d; ++du) {
                    const Scalar score = vol.at(y, x, dv, du);
                    const int norm2 = du * du + dv * dv;
                    const bool better =
                        first || (minimize ? score < best : score > best);
                    if (better || (score == best && norm2 < best_norm2)) {
                        best = score;
                        best_du = du;
                        best_dv = dv;
                        best_norm2 = norm2;
                        first = false;
                    }
                }
            }
            out.u(y, x) = incoming.u(y, x) + best_du;
            out.v(y, x) = incoming.v(y, x) + best_dv;
        }
    }
    return out;
}

FlowField coarse_to_fine_wta(const Image& img1, const Image& img2,
                             const SolveConfig& cfg) {
    if (cfg.n_levels < 1)
        throw std::invalid_argument("coarse_to_fine_wta: need at least one level");
    const Pyramid p1 = build_pyramid(img1, cfg.n_levels);
    const Pyramid p2 = build_pyramid(img2, cfg.n_levels);
    FlowField flow;
    for (int lvl = cfg.n_levels - 1; lvl >= 0; --lvl) {
        const Image& a = p1.levels[lvl];
        const Image& b = p2.levels[lvl];
        const FlowField incoming = (lvl == cfg.n_levels - 1)
                                       ? FlowField(a.height, a.width)
                                       : upsample_flow(flow, a.height, a.width);
        flow = wta_single_level(a, b, incoming, SearchRange{cfg.delta}, cfg.mode,
                                cfg.distance);
    }
    return flow;
}

DescentResult two_level_descent(const Image& img1, const Image& img2,
                                const SolveConfig& cfg) {
    check_descent_inputs(img1, img2, cfg);
    if (cfg.n_levels != 2)
        throw std::invalid_argument("two_level_descent: n_levels must be 2");
    const Pyramid p1 = build_pyramid(img1, 2);
    const Pyramid p2 = build_pyramid(img2, 2);
    const Image& f1 = p1.levels[0];
    const Image& f2 = p2.levels[0];
    const Image& c1 = p1.levels[1];
    const Image& c2 = p2.levels[1];

    FlowField F0(c1.height, c1.width, cfg.coarse_init_u, cfg.coarse_init_v);
    FlowField R1(f1.height, f1.width);

    DescentResult out;
    WelfordState wf;
    std::vector<Scalar> prev_theta, prev_grad;
    Scalar ncc_sum = 0.0;
    int ncc_n = 0;

    auto fine_flow_of = [&](const FlowField& coarse, const FlowField& residual) {
        FlowField f = upsample_flow(coarse, f1.height, f1.width);
        for (size_t i = 0; i < f.data.size(); ++i) f.data[i] += residual.data[i];
        return f;
    };

    for (int k = 0; k < cfg.iters; ++k) {
        const LevelEval lc = eval_sad_level(c1, c2, F0);
        const FlowField F1 = fine_flow_of(F0, R1);
        const LevelEval lf = eval_sad_level(f1, f2, F1);
        const FlowField gdir = as_flow(lc.grad);
        const FlowField gvia =
            upsample_flow_adjoint(as_flow(lf.grad), F0.height, F0.width);

        GradTraceEntry e;
        e.iter = k;
        e.loss_coarse = lc.loss;
        e.loss_fine = lf.loss;
        e.ncc = ncc(gdir.data, gvia.data);
        if (l2_norm(gdir.data) > kDegenerateNorm &&
            l2_norm(gvia.data) > kDegenerateNorm) {
            ncc_sum += e.ncc;
            ++ncc_n;
        }

        std::vector<Scalar> theta;
        theta.reserve(F0.data.size() + R1.data.size());
        theta.insert(theta.end(), F0.data.begin(), F0.data.end());
        theta.insert(theta.end(), R1.data.begin(), R1.data.end());
        std::vector<Scalar> gall;
        gall.reserve(theta.size());
        for (size_t i = 0; i < F0.data.size(); ++i)
            gall.push_back(cfg.stop_gradient ? gdir.data[i]
                                             : gdir.data[i] + gvia.data[i]);
        gall.insert(gall.end(), lf.grad.data.begin(), lf.grad.data.end());

        if (!prev_theta.empty() && theta != prev_theta)
            e.beta_eff = beta_eff(gall, prev_grad, theta, prev_theta);
        welford_update(wf, gall);
        e.sigma2 = wf.count >= 2 ? mean_variance(wf) : 0.0;
        e.grad_direct = gdir;
        e.grad_via_fine = gvia;
        out.trace.entries.push_back(std::move(e));
        prev_theta = std::move(theta);
        prev_grad = std::move(gall);

        for (size_t i = 0; i < F0.data.size(); ++i) {
            if (cfg.stop_gradient)
                F0.data[i] -= cfg.step * gdir.data[i];
            else
                F0.data[i] -= cfg.step * (gdir.data[i] + gvia.data[i]);
        }
        for (size_t i = 0; i < R1.data.size(); ++i)
            R1.data[i] -= cfg.step * lf.grad.data[i];
        out.coarse_trajectory.push_back(F0);

        if (!std::isfinite(lc.loss) || !std::isfinite(lf.loss) ||
            !all_finite(F0.data) || !all_finite(R1.data)) {
            out.trace.diverged = true;
            out.trace.divergence_iter = k;
            break;
        }
    }

    out.coarse_flow = F0;
    out.fine_residual = R1;
    out.fine_flow = fine_flow_of(F0, R1);
    if (out.trace.diverged) {
        // flows are non-finite; evaluating them would index garbage
        out.final_loss_coarse = std::numeric_limits<Scalar>::infinity();
        out.final_loss_fine = std::numeric_limits<Scalar>::infinity();
    } else {
        out.final_loss_coarse = eval_sad_level(c1, c2, F0).loss;
        out.final_loss_fine = eval_sad_level(f1, f2, out.fine_flow).loss;
    }
    out.mean_ncc = ncc_n > 0 ? ncc_sum / ncc_n : 0.0;
    return out;
}

DescentResult coarse_only_descent(const Image& img1, const Image& img2,
                                  const SolveConfig& cfg) {
    check_descent_inputs(img1, img2, cfg);
    if (cfg.n_levels != 2)
        throw std::invalid_argument("coarse_only_descent: n_levels must be 2");
    const Pyramid p1 = build_pyramid(img1, 2);
    const Pyramid p2 = build_pyramid(img2, 2);
    const Image& f1 = p1.levels[0];
    const Image& c1 = p1.levels[1];
    const Image& c2 = p2.levels[1];

    FlowField F0(c1.height, c1.width, cfg.coarse_init_u, cfg.coarse_init_v);

    DescentResult out;
    WelfordState wf;
    std::vector<Scalar> prev_theta, prev_grad;

    for (int k = 0; k < cfg.iters; ++k) {
        const LevelEval lc = eval_sad_level(c1, c2, F0);
        const FlowField gdir = as_flow(lc.grad);

        GradTraceEntry e;
        e.iter = k;
        e.loss_coarse = lc.loss;
        if (!prev_theta.empty() && F0.data != prev_theta)
            e.beta_eff = beta_eff(gdir.data, prev_grad, F0.data, prev_theta);
        welford_update(wf, gdir.data);
        e.sigma2 = wf.count >= 2 ? mean_variance(wf) : 0.0;
        e.grad_direct = gdir;
        out.trace.entries.push_back(std::move(e));
        prev_theta = F0.data;
        prev_grad = gdir.data;

        for (size_t i = 0; i < F0.data.size(); ++i)
            F0.data[i] -= cfg.step * gdir.data[i];
        out.coarse_trajectory.push_back(F0);

        if (!std::isfinite(lc.loss) || !all_finite(F0.data)) {
            out.trace.diverged = true;
            out.trace.divergence_iter = k;
            break;
        }
    }

    out.coarse_flow = F0;
    out.fine_flow = upsample_flow(F0, f1.height, f1.width);
    out.final_loss_coarse = out.trace.diverged
                                ? std::numeric_limits<Scalar>::infinity()
                                : eval_sad_level(c1, c2, F0).loss;
    return out;
}

}  // namespace pyraflow
