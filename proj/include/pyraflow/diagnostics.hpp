#pragma once

#include <pyraflow/core.hpp>

#include <optional>
#include <string>
#include <vector>

namespace pyraflow {

/// Summary metrics over the valid pixels of a prediction/reference pair.
struct MetricReport {
    Scalar epe = 0.0;
    Scalar fl_all = 0.0;
    size_t n_valid = 0;
};

/// Mean endpoint error |pred - gt|_2 over set pixels. Throws when the mask
/// is empty.
Scalar epe(const FlowField& pred, const FlowField& gt, const Mask& valid);

/// Outlier fraction: a valid pixel is an outlier iff its endpoint error is
/// > 3 px and > 5% of the reference magnitude.
Scalar fl_all(const FlowField& pred, const FlowField& gt, const Mask& valid);

MetricReport evaluate_flow(const FlowField& pred, const FlowField& gt,
                           const Mask& valid);

/// One bin of a magnitude-binned error profile. mean_epe is absent when the
/// bin holds no pixels. hi of the last bin is +infinity.
struct HistogramBin {
    Scalar lo = 0.0;
    Scalar hi = 0.0;
    size_t count = 0;
    std::optional<Scalar> mean_epe;
};

/// Edges {0,5,10,20,40,80}; the last bin extends to infinity.
std::vector<Scalar> default_hist_edges();

/// Bins valid pixels by reference-flow magnitude (lower edge inclusive) and
/// reports per-bin pixel counts and mean endpoint error. Edges must be
/// strictly increasing and non-empty.
std::vector<HistogramBin> error_histogram(const FlowField& pred,
                                          const FlowField& gt, const Mask& valid,
                                          const std::vector<Scalar>& edges);

/// Streaming per-element mean/variance accumulator (Welford). Elements are
/// flat vectors of fixed dimension; the first update fixes the dimension.
struct WelfordState {
    size_t count = 0;
    std::vector<Scalar> mean;
    std::vector<Scalar> m2;
};

void welford_update(WelfordState& state, const std::vector<Scalar>& sample);

/// Unbiased per-element variance m2/(count-1). Requires count >= 2.
std::vector<Scalar> welford_variance(const WelfordState& state);

/// Scalar summary: mean of the per-element variances.
Scalar mean_variance(const WelfordState& state);

/// Combines two accumulators as if their streams were concatenated.
WelfordState welford_merge(const WelfordState& a, const WelfordState& b);

/// Normalized cross correlation of two equally sized vectors after mean
/// removal, in [-1, 1]. A constant argument is degenerate and yields 0.
Scalar ncc(const std::vector<Scalar>& a, const std::vector<Scalar>& b);

/// Local smoothness estimate |g1 - g2| / |t1 - t2| for gradients g measured
/// at parameter vectors t. Throws when t1 == t2.
Scalar beta_eff(const std::vector<Scalar>& grad1, const std::vector<Scalar>& grad2,
                const std::vector<Scalar>& theta1, const std::vector<Scalar>& theta2);

/// Per-iteration record of a two-level descent run: the direct coarse loss
/// partial, the via-flow partial arriving from the finer level, and scalar
/// diagnostics derived from them.
struct GradTraceEntry {
    int iter = 0;
    Scalar ncc = 0.0;
    Scalar beta_eff = 0.0;
    Scalar sigma2 = 0.0;
    Scalar loss_coarse = 0.0;
    Scalar loss_fine = 0.0;
    FlowField grad_direct;
    FlowField grad_via_fine;
};

struct GradTrace {
    std::vector<GradTraceEntry> entries;
    bool diverged = false;
    int divergence_iter = -1;
};

/// CSV with fixed header `iter,ncc,beta_eff,sigma2`, one row per entry.
std::string trace_csv(const GradTrace& trace);
void write_trace_csv(const GradTrace& trace, const std::string& path);

/// CSV with fixed header `bin_lo,bin_hi,count,mean_epe`; an empty bin leaves
/// the mean_epe field blank; an unbounded hi prints as inf.
std::string hist_csv(const std::vector<HistogramBin>& bins);
void write_hist_csv(const std::vector<HistogramBin>& bins, const std::string& path);

/// Trailing moving average: out[i] = mean(xs[max(0,i-window+1) .. i]).
/// window must be >= 1.
std::vector<Scalar> moving_average(const std::vector<Scalar>& xs, int window);

}  // namespace pyraflow
