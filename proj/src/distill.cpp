#include <pyraflow/distill.hpp>

#include <cmath>
#include <stdexcept>

namespace pyraflow {

namespace {

void check_flow_pair(const FlowField& a, const FlowField& b, const char* what) {
    if (a.empty() || b.empty() || a.height != b.height || a.width != b.width)
        throw std::invalid_argument(std::string(what) + ": flow shapes disagree");
}

void check_nonneg(Scalar value, const char* what) {
    if (!(value >= 0.0))
        throw std::invalid_argument(std::string(what) + " must be non-negative");
}

}  // namespace

Mask occlusion_consistency(const FlowField& f12, const FlowField& f21,
                           const DistillConfig& cfg) {
    check_flow_pair(f12, f21, "occlusion_consistency");
    check_nonneg(cfg.occl_abs, "occl_abs");
    check_nonneg(cfg.occl_rel, "occl_rel");
    Mask out(f12.height, f12.width);
    for (int y = 0; y < f12.height; ++y) {
        for (int x = 0; x < f12.width; ++x) {
            const Scalar fu = f12.u(y, x);
            const Scalar fv = f12.v(y, x);
            Scalar bu = 0.0, bv = 0.0;
            bilinear_sample_flow(f21, x + fu, y + fv, bu, bv);
            const Scalar round_trip = (fu + bu) * (fu + bu) + (fv + bv) * (fv + bv);
            const Scalar mags = fu * fu + fv * fv + bu * bu + bv * bv;
            out.at(y, x) = (round_trip - cfg.occl_abs < cfg.occl_rel * mags) ? 1 : 0;
        }
    }
    return out;
}

Mask photometric_filter(const Image& img1, const Image& img2,
                        const FlowField& f12, const DistillConfig& cfg) {
    if (img1.empty() || img2.empty() || img1.height != img2.height ||
        img1.width != img2.width || img1.channels != img2.channels)
        throw std::invalid_argument("photometric_filter: image shapes disagree");
    if (f12.height != img1.height || f12.width != img1.width)
        throw std::invalid_argument("photometric_filter: flow shape disagrees");
    check_nonneg(cfg.photo_thresh, "photo_thresh");
    Mask out(img1.height, img1.width);
    for (int y = 0; y < img1.height; ++y) {
        for (int x = 0; x < img1.width; ++x) {
            const Scalar su = x + f12.u(y, x);
            const Scalar sv = y + f12.v(y, x);
            Scalar sad = 0.0;
            for (int c = 0; c < img1.channels; ++c)
                sad += std::abs(bilinear_sample(img2, su, sv, c) - img1.at(y, x, c));
            sad /= img1.channels;
            out.at(y, x) = (sad <= cfg.photo_thresh) ? 1 : 0;
        }
    }
    return out;
}

Mask confidence_filter(const Image& conf, const DistillConfig& cfg) {
    if (conf.empty() || conf.channels != 1)
        throw std::invalid_argument("confidence_filter: need a single-channel map");
    check_nonneg(cfg.conf_min, "conf_min");
    Mask out(conf.height, conf.width);
    for (size_t i = 0; i < conf.data.size(); ++i)
        out.data[i] = (conf.data[i] >= cfg.conf_min) ? 1 : 0;
    return out;
}

Mask gt_distance_filter(const FlowField& teacher, const FlowField& gt,
                        const Mask& gt_valid, const DistillConfig& cfg) {
    check_flow_pair(teacher, gt, "gt_distance_filter");
    if (gt_valid.height != teacher.height || gt_valid.width != teacher.width)
        throw std::invalid_argument("gt_distance_filter: mask shape disagrees");
    check_nonneg(cfg.gt_dist_max, "gt_dist_max");
    Mask out(teacher.height, teacher.width);
    for (int y = 0; y < teacher.height; ++y) {
        for (int x = 0; x < teacher.width; ++x) {
            if (!gt_valid.at(y, x)) {
                out.at(y, x) = 1;
                continue;
            }
            const Scalar du = teacher.u(y, x) - gt.u(y, x);
            const Scalar dv = teacher.v(y, x) - gt.v(y, x);
            out.at(y, x) = (std::sqrt(du * du + dv * dv) <= cfg.gt_dist_max) ? 1 : 0;
        }
    }
    return out;
}

Mask erosion_prune(const Mask& mask, int radius) {
    if (mask.data.empty())
        throw std::invalid_argument("erosion_prune: empty mask");
    if (radius < 0)
        throw std::invalid_argument("erosion_prune: radius must be non-negative");
    if (radius == 0) return mask;
    Mask out(mask.height, mask.width);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            // Window positions outside the grid count as clear.
            if (y < radius || y >= mask.height - radius || x < radius ||
                x >= mask.width - radius)
                continue;
            uint8_t keep = 1;
            for (int dy = -radius; dy <= radius && keep; ++dy)
                for (int dx = -radius; dx <= radius && keep; ++dx)
                    keep = mask.at(y + dy, x + dx);
            out.at(y, x) = keep;
        }
    }
    return out;
}

PseudoGroundTruth make_pseudo_gt(const FlowField& teacher, const FlowField& f21,
                                 const Image& img1, const Image& img2,
                                 const Image* conf, const FlowField* gt,
                                 const Mask* gt_valid, const DistillConfig& cfg) {
    if ((gt == nullptr) != (gt_valid == nullptr))
        throw std::invalid_argument("make_pseudo_gt: gt and gt_valid go together");
    Mask survivors = occlusion_consistency(teacher, f21, cfg);
    const Mask photo = photometric_filter(img1, img2, teacher, cfg);
    for (size_t i = 0; i < survivors.data.size(); ++i)
        survivors.data[i] &= photo.data[i];
    if (conf) {
        const Mask c = confidence_filter(*conf, cfg);
        if (c.height != survivors.height || c.width != survivors.width)
            throw std::invalid_argument("make_pseudo_gt: confidence shape disagrees");
        for (size_t i = 0; i < survivors.data.size(); ++i)
            survivors.data[i] &= c.data[i];
    }
    if (gt) {
        const Mask g = gt_distance_filter(teacher, *gt, *gt_valid, cfg);
        for (size_t i = 0; i < survivors.data.size(); ++i)
            survivors.data[i] &= g.data[i];
    }
    PseudoGroundTruth out;
    out.flow = teacher;
    out.valid = erosion_prune(survivors, cfg.erosion_radius);
    return out;
}

}  // namespace pyraflow
