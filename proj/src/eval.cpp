#include "eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>

#include "error.hpp"
#include "util.hpp"

namespace vcm::eval {

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) raise(ErrorKind::InvalidArg, "pearson: length mismatch");
    if (x.size() < 2) raise(ErrorKind::Numeric, "pearson needs at least 2 points");
    const double n = double(x.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, syy = 0, sxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0 || syy == 0) raise(ErrorKind::Numeric, "pearson: zero variance");
    return sxy / std::sqrt(sxx * syy);
}

double rmse(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) raise(ErrorKind::InvalidArg, "rmse: length mismatch");
    if (x.empty()) raise(ErrorKind::InvalidArg, "rmse needs at least 1 point");
    double acc = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return std::sqrt(acc / double(x.size()));
}

double SigmoidMapping::operator()(double x) const {
    const double v = a + (b - a) / (1.0 + std::exp(-c * (x - d)));
    return std::clamp(v, 1.0, 5.0);
}

namespace {

using Params = std::array<double, 4>; // a, b, c, d

SigmoidMapping project(const Params& p) {
    SigmoidMapping m;
    m.a = p[0];
    m.b = std::max(p[1], p[0]); // keep the mapping non-decreasing
    m.c = std::max(p[2], 0.0);
    m.d = p[3];
    return m;
}

double sum_squared_error(const Params& p, std::span<const double> raw,
                         std::span<const double> mos) {
    const SigmoidMapping m = project(p);
    double acc = 0;
    for (size_t i = 0; i < raw.size(); ++i) {
        const double e = m(raw[i]) - mos[i];
        acc += e * e;
    }
    return acc;
}

// Nelder-Mead with standard coefficients and a fixed evaluation budget.
Params simplex_minimize(Params start, const Params& steps,
                        const std::function<double(const Params&)>& objective, int budget) {
    constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;
    constexpr size_t kDim = 4;

    std::array<Params, kDim + 1> pts;
    std::array<double, kDim + 1> vals;
    pts[0] = start;
    for (size_t i = 0; i < kDim; ++i) {
        pts[i + 1] = start;
        pts[i + 1][i] += steps[i];
    }
    int evals = 0;
    for (size_t i = 0; i <= kDim; ++i) {
        vals[i] = objective(pts[i]);
        ++evals;
    }

    auto order = [&] {
        std::array<size_t, kDim + 1> idx;
        for (size_t i = 0; i <= kDim; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](size_t l, size_t r) { return vals[l] < vals[r]; });
        std::array<Params, kDim + 1> np;
        std::array<double, kDim + 1> nv;
        for (size_t i = 0; i <= kDim; ++i) {
            np[i] = pts[idx[i]];
            nv[i] = vals[idx[i]];
        }
        pts = np;
        vals = nv;
    };

    while (evals < budget) {
        order();
        Params centroid{};
        for (size_t i = 0; i < kDim; ++i)
            for (size_t j = 0; j < kDim; ++j) centroid[j] += pts[i][j] / double(kDim);

        auto blend = [&](double t) {
            Params p;
            for (size_t j = 0; j < kDim; ++j)
                p[j] = centroid[j] + t * (pts[kDim][j] - centroid[j]);
            return p;
        };

        const Params reflected = blend(-kReflect);
        const double fr = objective(reflected);
        ++evals;
        if (fr < vals[0]) {
            const Params expanded = blend(-kReflect * kExpand);
            const double fe = objective(expanded);
            ++evals;
            if (fe < fr) {
                pts[kDim] = expanded;
                vals[kDim] = fe;
            } else {
                pts[kDim] = reflected;
                vals[kDim] = fr;
            }
        } else if (fr < vals[kDim - 1]) {
            pts[kDim] = reflected;
            vals[kDim] = fr;
        } else {
            const Params contracted = blend(fr < vals[kDim] ? -kContract : kContract);
            const double fc = objective(contracted);
            ++evals;
            if (fc < std::min(fr, vals[kDim])) {
                pts[kDim] = contracted;
                vals[kDim] = fc;
            } else {
                for (size_t i = 1; i <= kDim; ++i) {
                    for (size_t j = 0; j < kDim; ++j)
                        pts[i][j] = pts[0][j] + kShrink * (pts[i][j] - pts[0][j]);
                    vals[i] = objective(pts[i]);
                    ++evals;
                }
            }
        }
    }
    order();
    return pts[0];
}

} // namespace

SigmoidMapping fit_mapping(std::span<const double> raw, std::span<const double> mos) {
    if (raw.size() != mos.size()) raise(ErrorKind::InvalidArg, "fit_mapping: length mismatch");
    if (raw.size() < 4) raise(ErrorKind::Numeric, "fit_mapping needs at least 4 pairs");
    const auto [raw_min_it, raw_max_it] = std::minmax_element(raw.begin(), raw.end());
    if (*raw_min_it == *raw_max_it)
        raise(ErrorKind::Numeric, "fit_mapping: raw scores are constant");
    const double raw_range = *raw_max_it - *raw_min_it;

    std::vector<double> sorted_raw(raw.begin(), raw.end());
    std::sort(sorted_raw.begin(), sorted_raw.end());
    const double median = sorted_raw[sorted_raw.size() / 2];
    const auto [mos_min_it, mos_max_it] = std::minmax_element(mos.begin(), mos.end());
    const double mos_range = std::max(*mos_max_it - *mos_min_it, 0.5);

    // slope at the midpoint ~ mos range / raw range
    Params start{*mos_min_it, *mos_max_it, 4.0 / raw_range, median};
    Params steps{0.25 * mos_range + 0.1, 0.25 * mos_range + 0.1, 2.0 / raw_range,
                 0.25 * raw_range + 0.1};
    auto objective = [&](const Params& p) { return sum_squared_error(p, raw, mos); };

    Params best = simplex_minimize(start, steps, objective, 4000);
    // one restart around the incumbent with finer steps
    Params fine_steps{steps[0] * 0.1, steps[1] * 0.1, steps[2] * 0.1, steps[3] * 0.1};
    best = simplex_minimize(best, fine_steps, objective, 4000);
    return project(best);
}

EvalReport evaluate_model(std::span<const double> predictions, std::span<const double> mos) {
    EvalReport report;
    report.mapping = fit_mapping(predictions, mos);
    report.mapped.reserve(predictions.size());
    for (double p : predictions) report.mapped.push_back(report.mapping(p));
    report.pcc = pearson(report.mapped, mos);
    report.rmse = rmse(report.mapped, mos);
    return report;
}

void export_timeline(const TimelineColumns& columns, const std::string& path) {
    const size_t n = columns.quality.size();
    if (n == 0) raise(ErrorKind::InvalidArg, "timeline is empty");
    auto check_len = [&](std::span<const double> v, const char* what) {
        if (!v.empty() && v.size() != n)
            raise(ErrorKind::Format, std::string("timeline: ") + what + " length " +
                                         std::to_string(v.size()) + " != " + std::to_string(n));
    };
    check_len(columns.freeze, "freeze");
    check_len(columns.skip, "skip");
    check_len(columns.metric, "metric");
    if (!columns.metric.empty() && columns.metric_name.empty())
        raise(ErrorKind::InvalidArg, "timeline metric column needs a name");

    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::Io, "cannot open '" + path + "' for writing");
    out << "frame,q_raw,q_clamped,freeze_div10,skip_div10";
    if (!columns.metric.empty()) out << "," << columns.metric_name;
    out << "\n";
    for (size_t i = 0; i < n; ++i) {
        const double q = columns.quality[i];
        out << i << "," << util::format_g9(q) << ","
            << util::format_g9(std::clamp(q, 1.0, 5.0)) << ","
            << util::format_g9(columns.freeze.empty() ? 0.0 : columns.freeze[i] / 10.0) << ","
            << util::format_g9(columns.skip.empty() ? 0.0 : columns.skip[i] / 10.0);
        if (!columns.metric.empty()) out << "," << util::format_g9(columns.metric[i]);
        out << "\n";
    }
    out.flush();
    if (!out) raise(ErrorKind::Io, "write failure on '" + path + "'");
}

} // namespace vcm::eval
