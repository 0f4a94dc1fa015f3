#include "pyraflow/cues.hpp"

#include <cmath>
#include <stdexcept>

namespace pyraflow {

namespace {

void check_pair(const FlowField& a, const FlowField& b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("flow cues: empty flow field");
    if (a.height != b.height || a.width != b.width)
        throw std::invalid_argument("flow cues: flow dims differ");
}

}  // namespace

FlowField fwd_bwd_warp(const FlowField& flow_ab, const FlowField& flow_ba) {
    check_pair(flow_ab, flow_ba);
    FlowField out(flow_ab.height, flow_ab.width);
    for (int y = 0; y < flow_ab.height; ++y) {
        for (int x = 0; x < flow_ab.width; ++x) {
            Scalar su, sv;
            bilinear_sample_flow(flow_ba, x + flow_ab.u(y, x), y + flow_ab.v(y, x),
                                 su, sv);
            out.u(y, x) = -su;
            out.v(y, x) = -sv;
        }
    }
    return out;
}

void reverse_flow(const FlowField& flow_ba, FlowField& out_rev, Image& out_density) {
    if (flow_ba.empty())
        throw std::invalid_argument("reverse_flow: empty flow field");
    const int h = flow_ba.height, w = flow_ba.width;
    FlowField acc(h, w);
    Image density(h, w, 1, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Scalar fu = flow_ba.u(y, x);
            const Scalar fv = flow_ba.v(y, x);
            const Scalar tx = x + fu;
            const Scalar ty = y + fv;
            const int x0 = static_cast<int>(std::floor(tx));
            const int y0 = static_cast<int>(std::floor(ty));
            for (int ey = 0; ey <= 1; ++ey) {
                for (int ex = 0; ex <= 1; ++ex) {
                    const int nx = x0 + ex;
                    const int ny = y0 + ey;
                    if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                    const Scalar wx = 1.0 - std::abs(tx - nx);
                    const Scalar wy = 1.0 - std::abs(ty - ny);
                    if (wx <= 0.0 || wy <= 0.0) continue;
                    const Scalar wgt = wx * wy;
                    acc.u(ny, nx) += wgt * fu;
                    acc.v(ny, nx) += wgt * fv;
                    density.at(ny, nx) += wgt;
                }
            }
        }
    }
    out_rev = FlowField(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Scalar d = density.at(y, x);
            if (d > 0.0) {
                out_rev.u(y, x) = -acc.u(y, x) / d;
                out_rev.v(y, x) = -acc.v(y, x) / d;
            }
        }
    }
    out_density = std::move(density);
}

Image uniqueness_density(const FlowField& flow_ba) {
    FlowField rev;
    Image density;
    reverse_flow(flow_ba, rev, density);
    return density;
}

Mask out_of_image(const FlowField& flow) {
    if (flow.empty())
        throw std::invalid_argument("out_of_image: empty flow field");
    Mask mask(flow.height, flow.width);
    for (int y = 0; y < flow.height; ++y) {
        for (int x = 0; x < flow.width; ++x) {
            const Scalar tx = x + flow.u(y, x);
            const Scalar ty = y + flow.v(y, x);
            mask.at(y, x) =
                tx < 0.0 || tx > flow.width - 1 || ty < 0.0 || ty > flow.height - 1;
        }
    }
    return mask;
}

CueStack build_cue_stack(const FlowField& flow_ab, const FlowField& flow_ba) {
    check_pair(flow_ab, flow_ba);
    CueStack stack;
    stack.fb_flow = fwd_bwd_warp(flow_ab, flow_ba);
    reverse_flow(flow_ba, stack.rev_flow, stack.density);
    stack.out_of_image = out_of_image(flow_ab);
    return stack;
}

}  // namespace pyraflow
