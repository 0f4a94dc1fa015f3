#include "pyraflow/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pyraflow {

namespace {

void check_map(const PixelLossMap& map) {
    if (map.height <= 0 || map.width <= 0)
        throw std::invalid_argument("loss map must be non-empty");
    if (map.valid.height != map.height || map.valid.width != map.width)
        throw std::invalid_argument("loss map: mask dims differ");
    for (size_t i = 0; i < map.loss.size(); ++i) {
        if (!std::isfinite(map.loss[i]) || map.loss[i] < 0.0)
            throw std::invalid_argument("loss map: losses must be finite and non-negative");
        if (!map.valid.data[i] && map.loss[i] != 0.0)
            throw std::invalid_argument("loss map: invalid pixel carries non-zero loss");
    }
}

}  // namespace

PixelLossMap epe_loss_map(const FlowField& pred, const FlowField& gt, const Mask& valid) {
    if (pred.height != gt.height || pred.width != gt.width ||
        pred.height != valid.height || pred.width != valid.width)
        throw std::invalid_argument("epe_loss_map: dims differ");
    PixelLossMap map(pred.height, pred.width);
    map.valid = valid;
    for (int y = 0; y < pred.height; ++y) {
        for (int x = 0; x < pred.width; ++x) {
            if (!valid.at(y, x)) continue;
            const Scalar du = pred.u(y, x) - gt.u(y, x);
            const Scalar dv = pred.v(y, x) - gt.v(y, x);
            map.at(y, x) = std::sqrt(du * du + dv * dv);
        }
    }
    return map;
}

std::vector<Scalar> pool_weights(const PixelLossMap& map, const PoolConfig& cfg) {
    check_map(map);
    if (cfg.alpha_keep <= 0.0 || cfg.alpha_keep > 1.0)
        throw std::invalid_argument("pool_weights: alpha_keep must be in (0, 1]");
    std::vector<size_t> order;
    order.reserve(map.loss.size());
    for (size_t i = 0; i < map.loss.size(); ++i)
        if (map.valid.data[i]) order.push_back(i);
    if (order.empty())
        throw std::invalid_argument("pool_weights: no valid pixels");

    // Largest losses first; equal losses keep row-major pixel order.
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return map.loss[a] > map.loss[b];
    });

    const Scalar cap = 1.0 / (cfg.alpha_keep * static_cast<Scalar>(order.size()));
    std::vector<Scalar> weights(map.loss.size(), 0.0);
    Scalar budget = 1.0;
    for (size_t idx : order) {
        if (budget <= 0.0) break;
        const Scalar w = std::min(cap, budget);
        weights[idx] = w;
        budget -= w;
    }
    return weights;
}

Scalar pooled_loss(const PixelLossMap& map, const PoolConfig& cfg) {
    const std::vector<Scalar> w = pool_weights(map, cfg);
    Scalar acc = 0.0;
    for (size_t i = 0; i < w.size(); ++i) acc += w[i] * map.loss[i];
    return acc;
}

Mask in_range_mask(const FlowField& residual, int delta) {
    if (residual.empty())
        throw std::invalid_argument("in_range_mask: empty residual");
    if (delta < 0) throw std::invalid_argument("in_range_mask: negative range");
    Mask mask(residual.height, residual.width);
    for (int y = 0; y < residual.height; ++y)
        for (int x = 0; x < residual.width; ++x)
            mask.at(y, x) = std::abs(residual.u(y, x)) <= delta &&
                            std::abs(residual.v(y, x)) <= delta;
    return mask;
}

PixelLossMap sparse_rescale(const PixelLossMap& map) {
    check_map(map);
    const size_t n_valid = map.valid.count();
    if (n_valid == 0) return map;
    const Scalar scale = static_cast<Scalar>(map.loss.size()) / n_valid;
    PixelLossMap out = map;
    for (size_t i = 0; i < out.loss.size(); ++i)
        if (out.valid.data[i]) out.loss[i] *= scale;
    return out;
}

Scalar combine_losses(Scalar supervised, Scalar distilled, const CombineConfig& cfg) {
    if (cfg.alpha < 0.0 || cfg.alpha > 1.0)
        throw std::invalid_argument("combine_losses: alpha must be in [0, 1]");
    return cfg.alpha * supervised + (1.0 - cfg.alpha) * distilled;
}

Scalar supervised_loss(const FlowField& pred, const FlowField& gt, const Mask& gt_valid,
                       int delta, const PoolConfig& cfg) {
    FlowField residual(pred.height, pred.width);
    for (size_t i = 0; i < residual.data.size(); ++i)
        residual.data[i] = gt.data[i] - pred.data[i];
    const Mask reachable = in_range_mask(residual, delta);
    Mask valid(pred.height, pred.width);
    for (size_t i = 0; i < valid.data.size(); ++i)
        valid.data[i] = gt_valid.data[i] && reachable.data[i];
    const PixelLossMap map = sparse_rescale(epe_loss_map(pred, gt, valid));
    return pooled_loss(map, cfg);
}

Scalar distill_loss(const FlowField& pred, const FlowField& pseudo_flow,
                    const Mask& pseudo_valid) {
    const PixelLossMap map =
        sparse_rescale(epe_loss_map(pred, pseudo_flow, pseudo_valid));
    Scalar acc = 0.0;
    for (Scalar l : map.loss) acc += l;
    return acc / map.loss.size();
}

}  // namespace pyraflow
