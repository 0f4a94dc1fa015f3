#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "pyraflow/core.hpp"

// Shared deterministic generators and reference formulas for the test suites.
namespace testutil {

// Textbook 4-corner bilinear interpolation with explicit border clamping,
// written against the raw buffer; the independent reference the library
// implementations are compared to.
inline pyraflow::Scalar oracle_bilinear(const pyraflow::Image& img,
                                        pyraflow::Scalar u, pyraflow::Scalar v, int c) {
    u = std::clamp<pyraflow::Scalar>(u, 0.0, img.width - 1);
    v = std::clamp<pyraflow::Scalar>(v, 0.0, img.height - 1);
    const int x0 = static_cast<int>(std::floor(u));
    const int y0 = static_cast<int>(std::floor(v));
    const pyraflow::Scalar fx = u - x0;
    const pyraflow::Scalar fy = v - y0;
    pyraflow::Scalar acc = 0.0;
    for (int ey = 0; ey <= 1; ++ey) {
        for (int ex = 0; ex <= 1; ++ex) {
            const int xx = std::min(x0 + ex, img.width - 1);
            const int yy = std::min(y0 + ey, img.height - 1);
            const pyraflow::Scalar wx = ex ? fx : 1.0 - fx;
            const pyraflow::Scalar wy = ey ? fy : 1.0 - fy;
            acc += img.at(yy, xx, c) * wx * wy;
        }
    }
    return acc;
}

inline std::mt19937 make_rng(uint32_t seed) { return std::mt19937(seed); }

inline pyraflow::Image random_image(std::mt19937& rng, int h, int w, int c = 1,
                                    double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    pyraflow::Image img(h, w, c);
    for (auto& px : img.data) px = dist(rng);
    return img;
}

inline pyraflow::FlowField random_flow(std::mt19937& rng, int h, int w,
                                       double lo = -2.0, double hi = 2.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    pyraflow::FlowField f(h, w);
    for (auto& x : f.data) x = dist(rng);
    return f;
}

}  // namespace testutil
