#include <pyraflow/diagnostics.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace pyraflow {

namespace {

void check_pair(const FlowField& pred, const FlowField& gt, const Mask& valid) {
    if (pred.empty() || pred.height != gt.height || pred.width != gt.width ||
        valid.height != pred.height || valid.width != pred.width)
        throw std::invalid_argument("flow metric: shapes disagree");
}

Scalar pixel_error(const FlowField& pred, const FlowField& gt, int y, int x) {
    return std::hypot(pred.u(y, x) - gt.u(y, x), pred.v(y, x) - gt.v(y, x));
}

void check_same_dim(const std::vector<Scalar>& a, const std::vector<Scalar>& b,
                    const char* what) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument(std::string(what) +
                                    ": vectors must be non-empty and equal-sized");
}

bool is_constant(const std::vector<Scalar>& xs) {
    return std::all_of(xs.begin(), xs.end(),
                       [&](Scalar x) { return x == xs.front(); });
}

std::ostream& csv_number(std::ostream& os, Scalar x) {
    if (std::isinf(x))
        return os << (x > 0 ? "inf" : "-inf");
    os.precision(17);
    return os << x;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open for writing: " + path);
    out << text;
    if (!out)
        throw std::runtime_error("write failed: " + path);
}

}  // namespace

Scalar epe(const FlowField& pred, const FlowField& gt, const Mask& valid) {
    check_pair(pred, gt, valid);
    Scalar sum = 0.0;
    size_t n = 0;
    for (int y = 0; y < pred.height; ++y)
        for (int x = 0; x < pred.width; ++x)
            if (valid.at(y, x)) {
                sum += pixel_error(pred, gt, y, x);
                ++n;
            }
    if (n == 0) throw std::invalid_argument("epe: no valid pixels");
    return sum / n;
}

Scalar fl_all(const FlowField& pred, const FlowField& gt, const Mask& valid) {
    check_pair(pred, gt, valid);
    size_t outliers = 0, n = 0;
    for (int y = 0; y < pred.height; ++y)
        for (int x = 0; x < pred.width; ++x)
            if (valid.at(y, x)) {
                const Scalar err = pixel_error(pred, gt, y, x);
                const Scalar mag = std::hypot(gt.u(y, x), gt.v(y, x));
                outliers += (err > 3.0 && err > 0.05 * mag);
                ++n;
            }
    if (n == 0) throw std::invalid_argument("fl_all: no valid pixels");
    return static_cast<Scalar>(outliers) / n;
}

MetricReport evaluate_flow(const FlowField& pred, const FlowField& gt,
                           const Mask& valid) {
    MetricReport r;
    r.epe = epe(pred, gt, valid);
    r.fl_all = fl_all(pred, gt, valid);
    r.n_valid = valid.count();
    return r;
}

std::vector<Scalar> default_hist_edges() { return {0.0, 5.0, 10.0, 20.0, 40.0, 80.0}; }

std::vector<HistogramBin> error_histogram(const FlowField& pred,
                                          const FlowField& gt, const Mask& valid,
                                          const std::vector<Scalar>& edges) {
    check_pair(pred, gt, valid);
    if (edges.empty())
        throw std::invalid_argument("error_histogram: need at least one edge");
    for (size_t i = 1; i < edges.size(); ++i)
        if (!(edges[i] > edges[i - 1]))
            throw std::invalid_argument("error_histogram: edges must increase");
    std::vector<HistogramBin> bins(edges.size());
    std::vector<Scalar> sums(edges.size(), 0.0);
    for (size_t i = 0; i < edges.size(); ++i) {
        bins[i].lo = edges[i];
        bins[i].hi = i + 1 < edges.size() ? edges[i + 1]
                                          : std::numeric_limits<Scalar>::infinity();
    }
    for (int y = 0; y < pred.height; ++y)
        for (int x = 0; x < pred.width; ++x) {
            if (!valid.at(y, x)) continue;
            const Scalar mag = std::hypot(gt.u(y, x), gt.v(y, x));
            if (mag < edges.front()) continue;
            size_t b = edges.size() - 1;
            while (b > 0 && mag < edges[b]) --b;
            bins[b].count += 1;
            sums[b] += pixel_error(pred, gt, y, x);
        }
    for (size_t i = 0; i < bins.size(); ++i)
        if (bins[i].count > 0) bins[i].mean_epe = sums[i] / bins[i].count;
    return bins;
}

void welford_update(WelfordState& state, const std::vector<Scalar>& sample) {
    if (sample.empty())
        throw std::invalid_argument("welford_update: empty sample");
    if (state.count == 0) {
        state.mean.assign(sample.size(), 0.0);
        state.m2.assign(sample.size(), 0.0);
    } else if (sample.size() != state.mean.size()) {
        throw std::invalid_argument("welford_update: dimension changed");
    }
    state.count += 1;
    for (size_t i = 0; i < sample.size(); ++i) {
        const Scalar delta = sample[i] - state.mean[i];
        state.mean[i] += delta / state.count;
        state.m2[i] += delta * (sample[i] - state.mean[i]);
    }
}

std::vector<Scalar> welford_variance(const WelfordState& state) {
    if (state.count < 2)
        throw std::invalid_argument("welford_variance: need at least two samples");
    std::vector<Scalar> var(state.m2.size());
    for (size_t i = 0; i < var.size(); ++i) var[i] = state.m2[i] / (state.count - 1);
    return var;
}

Scalar mean_variance(const WelfordState& state) {
    const auto var = welford_variance(state);
    Scalar sum = 0.0;
    for (Scalar v : var) sum += v;
    return sum / var.size();
}

WelfordState welford_merge(const WelfordState& a, const WelfordState& b) {
    if (a.count == 0) return b;
    if (b.count == 0) return a;
    if (a.mean.size() != b.mean.size())
        throw std::invalid_argument("welford_merge: dimensions disagree");
    WelfordState out;
    out.count = a.count + b.count;
    out.mean.resize(a.mean.size());
    out.m2.resize(a.mean.size());
    for (size_t i = 0; i < a.mean.size(); ++i) {
        const Scalar delta = b.mean[i] - a.mean[i];
        out.mean[i] = a.mean[i] + delta * b.count / out.count;
        out.m2[i] = a.m2[i] + b.m2[i] +
                    delta * delta * (static_cast<Scalar>(a.count) * b.count / out.count);
    }
    return out;
}

Scalar ncc(const std::vector<Scalar>& a, const std::vector<Scalar>& b) {
    check_same_dim(a, b, "ncc");
    if (is_constant(a) || is_constant(b)) return 0.0;
    Scalar ma = 0.0, mb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= a.size();
    mb /= b.size();
    Scalar dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const Scalar ca = a[i] - ma, cb = b[i] - mb;
        dot += ca * cb;
        na += ca * ca;
        nb += cb * cb;
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

Scalar beta_eff(const std::vector<Scalar>& grad1, const std::vector<Scalar>& grad2,
                const std::vector<Scalar>& theta1, const std::vector<Scalar>& theta2) {
    check_same_dim(grad1, grad2, "beta_eff");
    check_same_dim(theta1, theta2, "beta_eff");
    Scalar num = 0.0, den = 0.0;
    for (size_t i = 0; i < grad1.size(); ++i) {
        const Scalar dg = grad1[i] - grad2[i];
        num += dg * dg;
    }
    for (size_t i = 0; i < theta1.size(); ++i) {
        const Scalar dt = theta1[i] - theta2[i];
        den += dt * dt;
    }
    if (den == 0.0)
        throw std::invalid_argument("beta_eff: parameter vectors coincide");
    return std::sqrt(num) / std::sqrt(den);
}

std::string trace_csv(const GradTrace& trace) {
    std::ostringstream os;
    os << "iter,ncc,beta_eff,sigma2\n";
    for (const auto& e : trace.entries) {
        os << e.iter << ',';
        csv_number(os, e.ncc) << ',';
        csv_number(os, e.beta_eff) << ',';
        csv_number(os, e.sigma2) << '\n';
    }
    return os.str();
}

void write_trace_csv(const GradTrace& trace, const std::string& path) {
    write_text(path, trace_csv(trace));
}

std::string hist_csv(const std::vector<HistogramBin>& bins) {
    std::ostringstream os;
    os << "bin_lo,bin_hi,count,mean_epe\n";
    for (const auto& b : bins) {
        csv_number(os, b.lo) << ',';
        csv_number(os, b.hi) << ',';
        os << b.count << ',';
        if (b.mean_epe) csv_number(os, *b.mean_epe);
        os << '\n';
    }
    return os.str();
}

void write_hist_csv(const std::vector<HistogramBin>& bins, const std::string& path) {
    write_text(path, hist_csv(bins));
}

std::vector<Scalar> moving_average(const std::vector<Scalar>& xs, int window) {
    if (window < 1)
        throw std::invalid_argument("moving_average: window must be positive");
    std::vector<Scalar> out(xs.size());
    Scalar running = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        running += xs[i];
        if (i >= static_cast<size_t>(window)) running -= xs[i - window];
        const size_t n = std::min<size_t>(i + 1, window);
        out[i] = running / n;
    }
    return out;
}

}  // namespace pyraflow
