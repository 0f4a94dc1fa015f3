// Command-line front end: scene demos, gradient self-checks, descent traces,
// pseudo-label filtering, flow evaluation, and visualization.
#include <CLI11.hpp>

#include <pyraflow/cost_volume.hpp>
#include <pyraflow/diagnostics.hpp>
#include <pyraflow/distill.hpp>
#include <pyraflow/io.hpp>
#include <pyraflow/toy.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace pyraflow;

namespace {

// PYRAFLOW_THREADS caps batch parallelism; 0 or unset means auto.
int thread_budget() {
    const char* env = std::getenv("PYRAFLOW_THREADS");
    long n = env ? std::strtol(env, nullptr, 10) : 0;
    if (n <= 0) n = static_cast<long>(std::thread::hardware_concurrency());
    return std::max(1, static_cast<int>(n));
}

FlowWithValidity load_flow_any(const std::string& path) {
    if (path.ends_with(".flo")) {
        FlowWithValidity out;
        out.flow = read_flo(path);
        out.valid = Mask(out.flow.height, out.flow.width, 1);
        return out;
    }
    if (path.ends_with(".png")) return read_kitti_png(path);
    throw IoError("unsupported flow format (want .flo or .png): " + path);
}

// Scene specs are "name[:seed]" with names box, translation, tug;
// translation also accepts "translation:seed:u:v".
SceneSpec parse_scene(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ':')) parts.push_back(tok);
    if (parts.empty()) throw CLI::ValidationError("--scene", "empty scene spec");

    auto num = [&](size_t i, int fallback) {
        return i < parts.size() ? std::stoi(parts[i]) : fallback;
    };
    const uint32_t seed = static_cast<uint32_t>(num(1, 1));
    if (parts[0] == "box") return make_box_and_dot_spec(seed);
    if (parts[0] == "tug") return make_tug_of_war_spec(seed);
    if (parts[0] == "translation")
        return make_translation_spec(seed, num(2, 2), num(3, -2));
    throw CLI::ValidationError("--scene", "unknown scene '" + parts[0] +
                                              "' (want box, translation, or tug)");
}

// ---------------------------------------------------------------------------
// grad-check: analytic gradients vs central finite differences

struct SuiteResult {
    std::string name;
    bool pass = false;
    Scalar max_err = 0.0;
    int instances = 0;
};

Scalar rel_err(Scalar analytic, Scalar fd) {
    return std::abs(analytic - fd) /
           std::max({1.0, std::abs(analytic), std::abs(fd)});
}

SuiteResult check_bilinear(int instances, Scalar tol, bool mutate) {
    std::mt19937 rng(101);
    const int h = 9, w = 9;
    const Scalar fd_h = 1e-5;
    std::uniform_int_distribution<int> cell(1, w - 3);
    std::uniform_real_distribution<double> frac(0.05, 0.95);
    SuiteResult r{"bilinear", true, 0.0, instances};
    for (int i = 0; i < instances; ++i) {
        Image img(h, w, 1);
        std::uniform_real_distribution<double> val(0.0, 1.0);
        for (auto& x : img.data) x = val(rng);
        const Scalar u = cell(rng) + frac(rng);
        const Scalar v = cell(rng) + frac(rng);
        GradientPair g = bilinear_sample_grad(img, u, v);
        if (mutate) g.du += 1e-2;
        const Scalar fdu =
            (bilinear_sample(img, u + fd_h, v) - bilinear_sample(img, u - fd_h, v)) /
            (2 * fd_h);
        const Scalar fdv =
            (bilinear_sample(img, u, v + fd_h) - bilinear_sample(img, u, v - fd_h)) /
            (2 * fd_h);
        r.max_err = std::max({r.max_err, rel_err(g.du, fdu), rel_err(g.dv, fdv)});
    }
    r.pass = r.max_err <= tol;
    return r;
}

Scalar inner(const CostVolume& up, const CostVolume& cv) {
    Scalar acc = 0.0;
    for (size_t i = 0; i < up.data.size(); ++i) acc += up.data[i] * cv.data[i];
    return acc;
}

SuiteResult check_cost_volume(CostMode mode, const std::string& name,
                              int instances, Scalar tol, bool mutate) {
    std::mt19937 rng(202 + static_cast<int>(mode));
    const int h = 8, w = 8, delta = 2;
    const Scalar fd_h = 1e-5;
    std::uniform_real_distribution<double> val(0.0, 1.0);
    std::uniform_real_distribution<double> mag(0.2, 0.8);
    std::uniform_int_distribution<int> sign01(0, 1);
    std::uniform_int_distribution<int> px(delta + 1, w - delta - 2);
    std::uniform_int_distribution<int> comp01(0, 1);
    std::uniform_real_distribution<double> uw(-1.0, 1.0);

    SuiteResult r{name, true, 0.0, instances};
    for (int i = 0; i < instances; ++i) {
        Image i1(h, w, 1), i2(h, w, 1);
        for (auto& x : i1.data) x = val(rng);
        for (auto& x : i2.data) x = val(rng);
        FlowField flow(h, w);
        for (auto& x : flow.data) x = (sign01(rng) ? 1.0 : -1.0) * mag(rng);
        CostVolume up(h, w, delta);
        for (auto& x : up.data) x = uw(rng);

        const FlowGradField g = cv_grad_wrt_flow(i1, i2, flow, up, mode, false);

        const int y = px(rng), x = px(rng), comp = comp01(rng);
        FlowField fp = flow, fm = flow;
        const size_t idx = (static_cast<size_t>(y) * w + x) * 2 + comp;
        fp.data[idx] += fd_h;
        fm.data[idx] -= fd_h;
        const Scalar fd =
            (inner(up, build_cost_volume(i1, i2, fp, SearchRange{delta}, mode)) -
             inner(up, build_cost_volume(i1, i2, fm, SearchRange{delta}, mode))) /
            (2 * fd_h);
        Scalar an = comp == 0 ? g.du(y, x) : g.dv(y, x);
        if (mutate) an += 1e-2;
        r.max_err = std::max(r.max_err, rel_err(an, fd));
    }
    r.pass = r.max_err <= tol;
    return r;
}

int run_grad_check(int instances, Scalar tol, const std::string& mutate) {
    std::vector<SuiteResult> results;
    results.push_back(check_bilinear(instances, tol, mutate == "bilinear"));
    const std::pair<CostMode, std::string> modes[] = {
        {CostMode::warp_corr, "warp_corr"},
        {CostMode::sample_corr, "sample_corr"},
        {CostMode::sample_sad, "sample_sad"},
        {CostMode::warp_sad, "warp_sad"},
    };
    for (const auto& [mode, name] : modes)
        results.push_back(
            check_cost_volume(mode, name, instances / 4, tol, mutate == name));

    bool all_pass = true;
    bool mutate_hit = mutate.empty();
    for (const auto& r : results) {
        std::cout << r.name << ": " << (r.pass ? "PASS" : "FAIL") << " (max err "
                  << r.max_err << ", " << r.instances << " instances)\n";
        all_pass = all_pass && r.pass;
        if (r.name == mutate) mutate_hit = true;
    }
    if (!mutate_hit) {
        std::cerr << "unknown suite for --mutate: " << mutate << "\n";
        return 2;
    }
    return all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// cv-demo: two-level WTA on a generated scene, with a cost slice printout

int run_cv_demo(const std::string& scene_str, const std::string& mode_str,
                const std::string& dist_str, int delta, const std::string& out) {
    const SceneSpec spec = parse_scene(scene_str);
    const SyntheticScene sc = gen_scene(spec);
    const MatchMode mode = mode_str == "warp" ? MatchMode::warp : MatchMode::sample;
    const MatchDistance dist =
        dist_str == "corr" ? MatchDistance::corr : MatchDistance::sad;
    const SearchRange range{delta};

    const Pyramid p1 = build_pyramid(sc.img1, 2);
    const Pyramid p2 = build_pyramid(sc.img2, 2);
    const FlowField zero(p1.levels[1].height, p1.levels[1].width);
    const FlowField coarse =
        wta_single_level(p1.levels[1], p2.levels[1], zero, range, mode, dist);
    const FlowField incoming =
        upsample_flow(coarse, sc.img1.height, sc.img1.width);
    const FlowField flow =
        wta_single_level(sc.img1, sc.img2, incoming, range, mode, dist);

    // cost slice (dv = 0 row) at a representative object pixel
    int oy = sc.img1.height / 2, ox = sc.img1.width / 2;
    for (int y = 0; y < sc.object_mask.height && !sc.object_mask.at(oy, ox); ++y)
        for (int x = 0; x < sc.object_mask.width; ++x)
            if (sc.object_mask.at(y, x)) { oy = y; ox = x; }
    const CostVolume cv = build_cost_volume(sc.img1, sc.img2, incoming, range,
                                            to_cost_mode(mode, dist));
    std::cout << "scene " << scene_str << " mode " << mode_str << " distance "
              << dist_str << " delta " << delta << "\n";
    std::cout << "cost slice at (" << oy << "," << ox << "), dv=0:";
    for (int du = -delta; du <= delta; ++du) std::cout << " " << cv.at(oy, ox, 0, du);
    std::cout << "\n";
    std::cout << "flow at (" << oy << "," << ox << "): (" << flow.u(oy, ox) << ", "
              << flow.v(oy, ox) << "), truth (" << sc.gt.u(oy, ox) << ", "
              << sc.gt.v(oy, ox) << ")\n";

    Scalar obj_epe = 0.0;
    size_t n_obj = 0;
    for (int y = 0; y < flow.height; ++y) {
        for (int x = 0; x < flow.width; ++x) {
            if (!sc.object_mask.at(y, x)) continue;
            const Scalar du = flow.u(y, x) - sc.gt.u(y, x);
            const Scalar dv = flow.v(y, x) - sc.gt.v(y, x);
            obj_epe += std::sqrt(du * du + dv * dv);
            ++n_obj;
        }
    }
    if (n_obj) obj_epe /= n_obj;
    std::cout << "object epe " << obj_epe << " over " << n_obj << " px\n";

    if (!out.empty()) {
        write_flo(flow, out);
        std::cout << "wrote " << out << "\n";
    }

    // CI contract on the dipole scene: sampling must recover the object,
    // warping must miss it by at least a pixel.
    if (spec.kind == SceneKind::box_and_dot && dist == MatchDistance::sad) {
        const bool ok =
            mode == MatchMode::sample ? obj_epe == 0.0 : obj_epe >= 1.0;
        std::cout << (ok ? "mode behaves as documented\n"
                         : "mode does NOT behave as documented\n");
        return ok ? 0 : 1;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// toy-run: seeded descent runs with trace CSV output

int run_toy(const std::string& scene_str, const std::string& stop, int seeds,
            Scalar step, int iters, Scalar init_u, Scalar init_v,
            const std::string& out_prefix) {
    if (seeds < 1) throw CLI::ValidationError("--seeds", "need at least one seed");
    if (out_prefix.empty() && seeds > 1)
        throw CLI::ValidationError("--out", "multiple seeds need an output prefix");

    SolveConfig cfg;
    cfg.stop_gradient = stop == "on";
    cfg.step = step;
    cfg.iters = iters;
    cfg.coarse_init_u = init_u;
    cfg.coarse_init_v = init_v;

    struct Row {
        uint32_t seed = 0;
        Scalar mean_ncc = 0.0, loss_c = 0.0, loss_f = 0.0;
        bool diverged = false;
        GradTrace trace;
    };
    std::vector<Row> rows(seeds);

    // strip any seed suffix so --seeds enumerates 1..K of the family
    const std::string family = scene_str.substr(0, scene_str.find(':'));

    std::atomic<int> next{0};
    const int workers = std::min(thread_budget(), seeds);
    auto worker = [&]() {
        for (int i = next.fetch_add(1); i < seeds; i = next.fetch_add(1)) {
            const uint32_t seed = static_cast<uint32_t>(i + 1);
            SceneSpec spec = parse_scene(family + ":" + std::to_string(seed));
            const SyntheticScene sc = gen_scene(spec);
            const DescentResult r = two_level_descent(sc.img1, sc.img2, cfg);
            rows[i] = {seed, r.mean_ncc, r.final_loss_coarse, r.final_loss_fine,
                       r.trace.diverged, r.trace};
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    for (const auto& row : rows) {
        if (!out_prefix.empty()) {
            const std::string path =
                out_prefix + "_seed" + std::to_string(row.seed) + ".csv";
            write_trace_csv(row.trace, path);
        }
        std::ostream& os = out_prefix.empty() ? std::cerr : std::cout;
        os << "seed " << row.seed << " mean_ncc " << row.mean_ncc << " loss_coarse "
           << row.loss_c << " loss_fine " << row.loss_f
           << (row.diverged ? " DIVERGED" : "") << "\n";
    }
    if (out_prefix.empty()) std::cout << trace_csv(rows[0].trace);
    return 0;
}

// ---------------------------------------------------------------------------
// distill-filter, eval, viz

int run_distill(const std::string& teacher_path, const std::string& backward_path,
                const std::string& img1_path, const std::string& img2_path,
                const std::string& conf_path, const std::string& gt_path,
                const std::string& gt_valid_path, const std::string& out_flow,
                const std::string& out_valid, const DistillConfig& cfg) {
    const FlowField teacher = load_flow_any(teacher_path).flow;
    const FlowField backward = load_flow_any(backward_path).flow;
    const Image img1 = read_image_png(img1_path);
    const Image img2 = read_image_png(img2_path);

    Image conf;
    FlowField gt;
    Mask gt_valid;
    const bool has_conf = !conf_path.empty();
    const bool has_gt = !gt_path.empty();
    if (has_conf) conf = read_image_png(conf_path);
    if (has_gt) {
        const FlowWithValidity g = load_flow_any(gt_path);
        gt = g.flow;
        gt_valid = gt_valid_path.empty() ? g.valid : read_mask_png(gt_valid_path);
    }

    const PseudoGroundTruth pgt =
        make_pseudo_gt(teacher, backward, img1, img2, has_conf ? &conf : nullptr,
                       has_gt ? &gt : nullptr, has_gt ? &gt_valid : nullptr, cfg);

    write_flo(pgt.flow, out_flow);
    write_mask_png(pgt.valid, out_valid);
    const double kept = static_cast<double>(pgt.valid.count()) /
                        (static_cast<double>(pgt.valid.height) * pgt.valid.width);
    std::cout << "kept " << pgt.valid.count() << " px (" << 100.0 * kept << "%)\n";
    std::cout << "wrote " << out_flow << " and " << out_valid << "\n";
    return 0;
}

int run_eval(const std::string& pred_path, const std::string& gt_path,
             const std::string& hist_out) {
    const FlowWithValidity pred = load_flow_any(pred_path);
    const FlowWithValidity gt = load_flow_any(gt_path);
    if (pred.flow.height != gt.flow.height || pred.flow.width != gt.flow.width)
        throw IoError("eval: prediction and reference sizes differ");

    Mask valid(gt.valid.height, gt.valid.width);
    for (size_t i = 0; i < valid.data.size(); ++i)
        valid.data[i] = pred.valid.data[i] && gt.valid.data[i];

    const MetricReport m = evaluate_flow(pred.flow, gt.flow, valid);
    std::cout << "epe " << m.epe << "\n";
    std::cout << "fl_all " << m.fl_all << "\n";
    std::cout << "n_valid " << m.n_valid << "\n";

    const auto bins = error_histogram(pred.flow, gt.flow, valid, default_hist_edges());
    std::cout << "magnitude_bin count mean_epe\n";
    for (const auto& b : bins) {
        std::cout << "[" << b.lo << "," << b.hi << ") " << b.count << " ";
        if (b.mean_epe)
            std::cout << *b.mean_epe << "\n";
        else
            std::cout << "-\n";
    }
    if (!hist_out.empty()) {
        write_hist_csv(bins, hist_out);
        std::cout << "wrote " << hist_out << "\n";
    }
    return 0;
}

int run_viz(const std::string& flow_path, const std::string& out_path,
            Scalar max_mag) {
    const FlowField flow = load_flow_any(flow_path).flow;
    write_image_png(colorize_flow(flow, max_mag), out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pyramid optical-flow operators: demos, checks, and tools"};
    app.require_subcommand(1);

    // cv-demo
    auto* demo = app.add_subcommand(
        "cv-demo", "two-level WTA matching on a generated scene");
    std::string demo_mode = "sample", demo_dist = "sad", demo_scene = "box:1",
                demo_out;
    int demo_delta = 4;
    demo->add_option("--mode", demo_mode, "matching strategy")
        ->check(CLI::IsMember({"warp", "sample"}));
    demo->add_option("--distance", demo_dist, "matching distance")
        ->check(CLI::IsMember({"sad", "corr"}));
    demo->add_option("--delta", demo_delta, "search radius")
        ->check(CLI::PositiveNumber);
    demo->add_option("--scene", demo_scene, "scene spec name[:seed]");
    demo->add_option("--out", demo_out, "write the WTA flow to this .flo file");

    // grad-check
    auto* chk = app.add_subcommand(
        "grad-check", "compare analytic gradients against finite differences");
    int chk_instances = 200;
    double chk_tol = 1e-4;
    std::string chk_mutate;
    chk->add_option("--instances", chk_instances, "instances for the bilinear suite")
        ->check(CLI::PositiveNumber);
    chk->add_option("--tol", chk_tol, "relative tolerance")->check(CLI::PositiveNumber);
    chk->add_option("--mutate", chk_mutate,
                    "perturb the named suite's analytic values (self-test)")
        ->group("");

    // toy-run
    auto* toy = app.add_subcommand(
        "toy-run", "two-level descent with per-iteration gradient traces");
    std::string toy_stop, toy_scene = "tug", toy_out;
    int toy_seeds = 1, toy_iters = 200;
    double toy_step = 2e-3, toy_init_u = -0.75, toy_init_v = 0.0;
    toy->add_option("--stop-gradient", toy_stop,
                    "block the fine level's pull on the coarse flow")
        ->required()
        ->check(CLI::IsMember({"on", "off"}));
    toy->add_option("--seeds", toy_seeds, "run scene seeds 1..K")
        ->check(CLI::PositiveNumber);
    toy->add_option("--scene", toy_scene, "scene family (box, translation, tug)");
    toy->add_option("--step", toy_step, "descent step size");
    toy->add_option("--iters", toy_iters, "iteration budget");
    toy->add_option("--init-u", toy_init_u, "initial coarse flow u");
    toy->add_option("--init-v", toy_init_v, "initial coarse flow v");
    toy->add_option("--out", toy_out,
                    "trace CSV prefix (omit to print the CSV for a single seed)");

    // distill-filter
    auto* dst = app.add_subcommand(
        "distill-filter", "filter a teacher flow into pseudo ground truth");
    std::string d_teacher, d_backward, d_img1, d_img2, d_conf, d_gt, d_gt_valid,
        d_out_flow = "pseudo_gt.flo", d_out_valid = "pseudo_gt_valid.png";
    DistillConfig d_cfg;
    dst->add_option("--teacher", d_teacher, "forward teacher flow (.flo/.png)")
        ->required();
    dst->add_option("--backward", d_backward, "backward teacher flow (.flo/.png)")
        ->required();
    dst->add_option("--img1", d_img1, "first frame (png)")->required();
    dst->add_option("--img2", d_img2, "second frame (png)")->required();
    dst->add_option("--conf", d_conf, "confidence map (png, optional)");
    dst->add_option("--gt", d_gt, "sparse annotation flow (optional)");
    dst->add_option("--gt-valid", d_gt_valid, "annotation validity mask (png)");
    dst->add_option("--out-flow", d_out_flow, "output pseudo-GT flow (.flo)");
    dst->add_option("--out-valid", d_out_valid, "output validity mask (png)");
    dst->add_option("--occl-abs", d_cfg.occl_abs, "occlusion additive slack");
    dst->add_option("--occl-rel", d_cfg.occl_rel, "occlusion relative slack");
    dst->add_option("--photo-thresh", d_cfg.photo_thresh, "photometric bound");
    dst->add_option("--conf-min", d_cfg.conf_min, "confidence lower bound");
    dst->add_option("--gt-dist-max", d_cfg.gt_dist_max, "annotation distance bound");
    dst->add_option("--erosion-radius", d_cfg.erosion_radius, "survivor erosion");

    // eval
    auto* ev = app.add_subcommand("eval", "EPE / outlier metrics for two flow files");
    std::string e_pred, e_gt, e_hist;
    ev->add_option("--pred", e_pred, "predicted flow (.flo/.png)")->required();
    ev->add_option("--gt", e_gt, "reference flow (.flo/.png)")->required();
    ev->add_option("--hist-out", e_hist, "write the magnitude histogram CSV here");

    // viz
    auto* vz = app.add_subcommand("viz", "colorize a flow file");
    std::string v_flow, v_out = "flow.png";
    double v_max = 0.0;
    vz->add_option("--flow", v_flow, "flow file (.flo/.png)")->required();
    vz->add_option("--out", v_out, "output png");
    vz->add_option("--max-mag", v_max, "saturation magnitude (0 = auto)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (demo->parsed())
            return run_cv_demo(demo_scene, demo_mode, demo_dist, demo_delta, demo_out);
        if (chk->parsed()) return run_grad_check(chk_instances, chk_tol, chk_mutate);
        if (toy->parsed())
            return run_toy(toy_scene, toy_stop, toy_seeds, toy_step, toy_iters,
                           toy_init_u, toy_init_v, toy_out);
        if (dst->parsed())
            return run_distill(d_teacher, d_backward, d_img1, d_img2, d_conf, d_gt,
                               d_gt_valid, d_out_flow, d_out_valid, d_cfg);
        if (ev->parsed()) return run_eval(e_pred, e_gt, e_hist);
        if (vz->parsed()) return run_viz(v_flow, v_out, v_max);
    } catch (const CLI::ValidationError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
