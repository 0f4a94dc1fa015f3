#include "pyraflow/cost_volume.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pyraflow {

namespace {

void check_inputs(const Image& img1, const Image& img2, const FlowField& flow,
                  const SearchRange& range) {
    if (img1.empty() || img2.empty())
        throw std::invalid_argument("cost volume: empty image");
    if (img1.height != img2.height || img1.width != img2.width ||
        img1.channels != img2.channels)
        throw std::invalid_argument("cost volume: image dims differ");
    if (flow.height != img1.height || flow.width != img1.width)
        throw std::invalid_argument("cost volume: flow dims differ from images");
    if (range.delta < 0)
        throw std::invalid_argument("cost volume: negative search range");
}

int clampi(int x, int lo, int hi) { return x < lo ? lo : (x > hi ? hi : x); }

// Warped second image materialized on a band extended by the search radius,
// so the correlation stage always probes a stored value. The flow lookup
// replicates the border; the sample coordinate itself is the unclamped probe
// position plus that flow, which keeps warp- and sample-mode volumes
// identical under constant flow all the way to the image edge.
Image materialize_warped(const Image& img2, const FlowField& flow, int delta) {
    const int h = img2.height, w = img2.width, c = img2.channels;
    Image warped(h + 2 * delta, w + 2 * delta, c);
    for (int y = -delta; y < h + delta; ++y) {
        for (int x = -delta; x < w + delta; ++x) {
            const int fy = clampi(y, 0, h - 1);
            const int fx = clampi(x, 0, w - 1);
            const Scalar px = x + flow.u(fy, fx);
            const Scalar py = y + flow.v(fy, fx);
            for (int ch = 0; ch < c; ++ch)
                warped.at(y + delta, x + delta, ch) = bilinear_sample(img2, px, py, ch);
        }
    }
    return warped;
}

}  // namespace

CostVolume cv_warp_corr(const Image& img1, const Image& img2,
                        const FlowField& flow, const SearchRange& range) {
    check_inputs(img1, img2, flow, range);
    const int h = img1.height, w = img1.width, c = img1.channels, d = range.delta;
    const Image warped = materialize_warped(img2, flow, d);
    CostVolume vol(h, w, d);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int dv = -d; dv <= d; ++dv) {
                for (int du = -d; du <= d; ++du) {
                    Scalar acc = 0.0;
                    for (int ch = 0; ch < c; ++ch)
                        acc += img1.at(y, x, ch) * warped.at(y + dv + d, x + du + d, ch);
                    vol.at(y, x, dv, du) = acc / c;
                }
            }
        }
    }
    return vol;
}

CostVolume cv_sample_corr(const Image& img1, const Image& img2,
                          const FlowField& flow, const SearchRange& range) {
    check_inputs(img1, img2, flow, range);
    const int h = img1.height, w = img1.width, c = img1.channels, d = range.delta;
    CostVolume vol(h, w, d);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Scalar fu = flow.u(y, x);
            const Scalar fv = flow.v(y, x);
            for (int dv = -d; dv <= d; ++dv) {
                for (int du = -d; du <= d; ++du) {
                    Scalar acc = 0.0;
                    for (int ch = 0; ch < c; ++ch)
                        acc += img1.at(y, x, ch) *
                               bilinear_sample(img2, x + du + fu, y + dv + fv, ch);
                    vol.at(y, x, dv, du) = acc / c;
                }
            }
        }
    }
    return vol;
}

CostVolume cv_sample_sad(const Image& img1, const Image& img2,
                         const FlowField& flow, const SearchRange& range) {
    check_inputs(img1, img2, flow, range);
    const int h = img1.height, w = img1.width, c = img1.channels, d = range.delta;
    CostVolume vol(h, w, d);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Scalar fu = flow.u(y, x);
            const Scalar fv = flow.v(y, x);
            for (int dv = -d; dv <= d; ++dv) {
                for (int du = -d; du <= d; ++du) {
                    Scalar acc = 0.0;
                    for (int ch = 0; ch < c; ++ch)
                        acc += std::abs(img1.at(y, x, ch) -
                                        bilinear_sample(img2, x + du + fu, y + dv + fv, ch));
                    vol.at(y, x, dv, du) = acc / c;
                }
            }
        }
    }
    return vol;
}

CostVolume cv_warp_sad(const Image& img1, const Image& img2,
                       const FlowField& flow, const SearchRange& range) {
    check_inputs(img1, img2, flow, range);
    const int h = img1.height, w = img1.width, c = img1.channels, d = range.delta;
    const Image warped = materialize_warped(img2, flow, d);
    CostVolume vol(h, w, d);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int dv = -d; dv <= d; ++dv) {
                for (int du = -d; du <= d; ++du) {
                    Scalar acc = 0.0;
                    for (int ch = 0; ch < c; ++ch)
                        acc += std::abs(img1.at(y, x, ch) -
                                        warped.at(y + dv + d, x + du + d, ch));
                    vol.at(y, x, dv, du) = acc / c;
                }
            }
        }
    }
    return vol;
}

CostVolume build_cost_volume(const Image& img1, const Image& img2,
                             const FlowField& flow, const SearchRange& range,
                             CostMode mode) {
    switch (mode) {
        case CostMode::warp_corr: return cv_warp_corr(img1, img2, flow, range);
        case CostMode::sample_corr: return cv_sample_corr(img1, img2, flow, range);
        case CostMode::sample_sad: return cv_sample_sad(img1, img2, flow, range);
        case CostMode::warp_sad: return cv_warp_sad(img1, img2, flow, range);
    }
    throw std::invalid_argument("build_cost_volume: unknown mode");
}

FlowGradField cv_grad_wrt_flow(const Image& img1, const Image& img2,
                               const FlowField& flow, const CostVolume& upstream,
                               CostMode mode, bool stop_gradient) {
    SearchRange range{upstream.delta};
    check_inputs(img1, img2, flow, range);
    if (upstream.height != img1.height || upstream.width != img1.width)
        throw std::invalid_argument("cv_grad_wrt_flow: upstream dims differ");
    const int h = img1.height, w = img1.width, c = img1.channels, d = range.delta;
    FlowGradField grad(h, w);
    if (stop_gradient) return grad;

    if (mode == CostMode::warp_corr || mode == CostMode::warp_sad) {
        // V(x,delta) reads the flow at the (border-replicated) probe position,
        // so each term scatters onto that pixel's gradient.
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                for (int dv = -d; dv <= d; ++dv) {
                    for (int du = -d; du <= d; ++du) {
                        const Scalar up = upstream.at(y, x, dv, du);
                        if (up == 0.0) continue;
                        const int ry = clampi(y + dv, 0, h - 1);
                        const int rx = clampi(x + du, 0, w - 1);
                        const Scalar px = x + du + flow.u(ry, rx);
                        const Scalar py = y + dv + flow.v(ry, rx);
                        Scalar gu = 0.0, gv = 0.0;
                        for (int ch = 0; ch < c; ++ch) {
                            const GradientPair g = bilinear_sample_grad(img2, px, py, ch);
                            if (mode == CostMode::warp_corr) {
                                gu += img1.at(y, x, ch) * g.du;
                                gv += img1.at(y, x, ch) * g.dv;
                            } else {
                                const Scalar s = bilinear_sample(img2, px, py, ch);
                                const Scalar diff = s - img1.at(y, x, ch);
                                const Scalar sgn = (diff > 0.0) - (diff < 0.0);
                                gu += sgn * g.du;
                                gv += sgn * g.dv;
                            }
                        }
                        grad.du(ry, rx) += up * gu / c;
                        grad.dv(ry, rx) += up * gv / c;
                    }
                }
            }
        }
        return grad;
    }

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Scalar fu = flow.u(y, x);
            const Scalar fv = flow.v(y, x);
            Scalar sum_u = 0.0, sum_v = 0.0;
            for (int dv = -d; dv <= d; ++dv) {
                for (int du = -d; du <= d; ++du) {
                    const Scalar up = upstream.at(y, x, dv, du);
                    if (up == 0.0) continue;
                    const Scalar px = x + du + fu;
                    const Scalar py = y + dv + fv;
                    Scalar gu = 0.0, gv = 0.0;
                    for (int ch = 0; ch < c; ++ch) {
                        const GradientPair g = bilinear_sample_grad(img2, px, py, ch);
                        if (mode == CostMode::sample_corr) {
                            gu += img1.at(y, x, ch) * g.du;
                            gv += img1.at(y, x, ch) * g.dv;
                        } else {
                            // d|a - s|/dF = sign(s - a) * ds/dF, zero at a == s.
                            const Scalar s = bilinear_sample(img2, px, py, ch);
                            const Scalar diff = s - img1.at(y, x, ch);
                            const Scalar sgn = (diff > 0.0) - (diff < 0.0);
                            gu += sgn * g.du;
                            gv += sgn * g.dv;
                        }
                    }
                    sum_u += up * gu / c;
                    sum_v += up * gv / c;
                }
            }
            grad.du(y, x) = sum_u;
            grad.dv(y, x) = sum_v;
        }
    }
    return grad;
}

}  // namespace pyraflow
